"""Rank a small corpus against a query with a trained relatedness model.

    python3 demos/nearest_neighbors.py

The mean-of-word-vectors baseline is shown next to the model. With random
vectors the baseline mostly rewards word overlap, while the model has learned
which positions in the parse matter for the score.
"""

from treelstm.config import RunConfig
from treelstm.data import TOY, prepare_run, read_lines, toy_path
from treelstm.evaluation import mean_vector_scorer, model_scorer, nearest_neighbors
from treelstm.train import train, training_examples


def main():
    cfg, model, tr, dev = prepare_run(RunConfig(task="relatedness", variant="lstm", d=20, e=16, lr=0.05,
                                                emb_lr=0.1, batch_size=5, epochs=300, target=0.99, seed=2))
    train(model, training_examples(cfg, tr), dev, cfg)
    corpus = [line.split() for line in read_lines(toy_path(TOY["corpus"]))]
    query = corpus[0]
    print("query:", " ".join(query))
    for name, scorer in (("model", model_scorer(model)), ("mean vectors", mean_vector_scorer(model.emb))):
        print(f"\n{name}:")
        for item, score in nearest_neighbors(corpus, query, 5, scorer):
            print(f"  {score:.3f}  {' '.join(item)}")


if __name__ == "__main__":
    main()
