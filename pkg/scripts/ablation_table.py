"""Parameter and FLOP table for the full model and each ablation toggle.

    python3 scripts/ablation_table.py [--input-size 256] [--json]
"""

from __future__ import annotations

import argparse
import json

from useanet.model import ModelConfig
from useanet.profiler import profile

ROWS = [
    ("full", {}),
    ("w/o attention", {"attention": False}),
    ("w/o multi-branch", {"multi_branch": False}),
    ("w/o ultrasound-specific", {"ultrasound_specific": False}),
    ("w/o multi-scale (two-layer)", {"multi_scale": False}),
]


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--input-size", type=int, default=256)
    ap.add_argument("--json", action="store_true", help="emit JSON instead of a text table")
    args = ap.parse_args(argv)

    table = []
    for label, toggles in ROWS:
        rep = profile(ModelConfig(**toggles), args.input_size)
        table.append({"row": label, "params": rep.params, "flops": rep.flops,
                      "breakdown": {k: v["params"] for k, v in rep.breakdown.items()}})
    if args.json:
        print(json.dumps(table, indent=2))
        return
    full = table[0]
    print(f"{'configuration':30s} {'params (M)':>11s} {'FLOPs (G)':>10s} {'d params':>10s}")
    for row in table:
        print(f"{row['row']:30s} {row['params'] / 1e6:11.4f} {row['flops'] / 1e9:10.4f} "
              f"{row['params'] - full['params']:10d}")
    print("\nparameters by component (full):")
    for name, count in full["breakdown"].items():
        print(f"  {name:10s} {count:9d}")


if __name__ == "__main__":
    main()
