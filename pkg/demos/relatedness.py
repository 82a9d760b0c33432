"""Train a dependency Tree-LSTM to score sentence relatedness on 1-5.

    python3 demos/relatedness.py

The toy pairs are scored by how many of subject, verb and object they share.
Word vectors are random here, so they are tuned along with the model.
"""

from treelstm.config import RunConfig
from treelstm.data import prepare_run
from treelstm.evaluation import regression_metrics
from treelstm.train import train, training_examples


def main():
    cfg, model, tr, dev = prepare_run(RunConfig(task="relatedness", variant="childsum-dep", d=20, e=16, lr=0.05,
                                                emb_lr=0.1, batch_size=5, epochs=300, patience=300, target=0.99,
                                                seed=1))
    res = train(model, training_examples(cfg, tr), dev, cfg)
    print(f"stopped after {len(res.history)} epochs, best at {res.best_epoch}")
    preds = [model.predict_score(p.left, p.right) for p in dev]
    r, rho, err = regression_metrics(preds, [p.score for p in dev])
    print(f"pearson {r:.4f}  spearman {rho:.4f}  mse {err:.4f}\n")
    for pair, pred in list(zip(dev, preds))[:8]:
        print(f"  gold {pair.score:.2f} pred {pred:.2f}  {' '.join(pair.left.tokens)} | {' '.join(pair.right.tokens)}")


if __name__ == "__main__":
    main()
