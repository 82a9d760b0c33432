"""Compare hand-written gradients with central finite differences.

    python3 demos/gradient_check.py

Every encoder is paired with both heads on a small random instance. The last
part deliberately corrupts one analytic gradient to show the check catching it.
"""

from treelstm.config import VARIANTS
from treelstm.gradcheck import HEADS, TOLERANCE, gradcheck


def main():
    print(f"{'variant':14s}{'head':12s}worst relative error (tolerance {TOLERANCE:g})")
    for variant in sorted(VARIANTS):
        for head in HEADS:
            rep = gradcheck(variant, head, seed=1)
            print(f"{variant:14s}{head:12s}{rep.worst:.2e} {'ok' if rep.ok else 'FAILED'}")
    rep = gradcheck("childsum-dep", "similarity", seed=1, corrupt="enc.U_f")
    print(f"\nwith a corrupted forget-gate gradient the failing groups are: {rep.failures()}")


if __name__ == "__main__":
    main()
