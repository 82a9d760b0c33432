"""Pick memory sizes that give each encoder a similar parameter budget.

    python3 demos/parameter_budget.py

Counts follow a one-bias-per-gate convention with 300-d inputs. Searching for
the d that lands closest to the plain LSTM's budget at d=150 shows why wider
memories are affordable for some variants but not others.
"""

from treelstm.train import count_params


def closest_d(variant: str, budget: int, e: int = 300) -> int:
    return min(range(1, 400), key=lambda d: abs(count_params(variant, d, e) - budget))


def main():
    budget = count_params("lstm", 150)
    print(f"budget: plain LSTM at d=150 -> {budget:,} parameters\n")
    for variant in ("lstm", "bilstm", "lstm-2layer", "bilstm-2layer", "childsum-dep", "nary-const"):
        d = closest_d(variant, budget)
        print(f"{variant:14s} d={d:3d}  {count_params(variant, d):>9,}")
    print(f"\nwithout off-diagonal forget blocks, nary-const at d=150: {count_params('nary-const', 150, offdiag=False):,}")


if __name__ == "__main__":
    main()
