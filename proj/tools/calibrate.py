#!/usr/bin/env python3
"""Grid over hyperparameters for the split-IDX experiment; prints one line per setting."""
import argparse, itertools, json, pathlib, subprocess, tempfile

p = argparse.ArgumentParser()
p.add_argument("--cli", default="build/tools/agscl")
p.add_argument("--base", default="configs/split_mnist5k.json")
p.add_argument("--grid", required=True, help='JSON: {"hyper.mu": [..], "method": [..], ...}')
p.add_argument("--seeds", default="0,1,2")
args = p.parse_args()

base_path = pathlib.Path(args.base).resolve()
base = json.loads(base_path.read_text())
for k in ("train_images", "train_labels", "test_images", "test_labels"):
    base["tasks"][k] = str((base_path.parent / base["tasks"][k]).resolve())
grid = json.loads(args.grid)
keys = list(grid)
for values in itertools.product(*(grid[k] for k in keys)):
    cfg = json.loads(json.dumps(base))
    for k, v in zip(keys, values):
        node = cfg
        *path, leaf = k.split(".")
        for part in path:
            node = node.setdefault(part, {})
        node[leaf] = v
    cfg["finetune_reference"] = False
    cfg["write_checkpoints"] = False
    rows = []
    with tempfile.TemporaryDirectory() as tmp:
        cfg["seeds"] = [int(s) for s in args.seeds.split(",")]
        cfg.pop("seed", None)
        cpath = pathlib.Path(tmp) / "c.json"
        cpath.write_text(json.dumps(cfg))
        subprocess.run([args.cli, "run", str(cpath), "--out", tmp], check=True,
                       stdout=subprocess.DEVNULL)
        for s in cfg["seeds"]:
            d = json.loads((pathlib.Path(tmp) / f"seed_{s}" / "summary.json").read_text())
            a = d["aopc_area"]
            rows.append((d["final_average_accuracy"], d["S"],
                         a.get("highest", 0) - a.get("random", 0),
                         a.get("random", 0) - a.get("lowest", 0), d["sparsity"][-1]))
    acc = " ".join(f"{r[0]:.3f}" for r in rows)
    stab = " ".join(f"{r[1]:.3f}" for r in rows)
    mean = sum(r[0] for r in rows) / len(rows)
    aopc = " ".join(f"{r[2]:+.3f}/{r[3]:+.3f}" for r in rows)
    sparse = " ".join(f"{r[4]:.3f}" if r[4] is not None else "-" for r in rows)
    print(dict(zip(keys, values)), f"acc {acc} (mean {mean:.3f}) S {stab} aopc h-r/r-l {aopc}"
          f" sparsity {sparse}", flush=True)
