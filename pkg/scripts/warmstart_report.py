"""Compare warm-start fine-tuning against cold-start training on shifted
synthetic tasks.

Pretrains one linear model on a source task, then tracks validation
accuracy per epoch on three seeded target tasks, fine-tuning from the
pretrained weights versus training from random initialization. Purely
a report; neither curve is required to win:

    python3 scripts/warmstart_report.py
"""

import argparse

import numpy as np

from alpool.data import SplitSpec, generate_synthetic, split
from alpool.model import (
    Classifier,
    ModelConfig,
    TrainConfig,
    fine_tune,
    init,
    predict,
    train,
)


def val_accuracy(clf: Classifier, ds, pool) -> float:
    ids = sorted(pool.validation_ids)
    return float((predict(clf, ds.features_for(ids)) == ds.labels_for(ids)).mean())


def curve(start: Classifier, ds, pool, epochs: int, seed: int) -> list[float]:
    train_ids = sorted(pool.training_cohort)
    x, y = ds.features_for(train_ids), ds.labels_for(train_ids)
    accs, cur = [], start
    for epoch in range(epochs):
        cur = fine_tune(cur, x, y, TrainConfig(learning_rate=0.02, epochs=1,
                                               batch_size=8, seed=seed + epoch))
        accs.append(val_accuracy(cur, ds, pool))
    return accs


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--tasks", type=int, default=3)
    args = parser.parse_args()

    source = generate_synthetic(500, 2, [[-1.0, -1.0], [1.0, 1.0]], 1.0, seed=7)
    base = train(
        init(ModelConfig(feature_count=2, class_count=2, seed=7)),
        source.samples, source.labels,
        TrainConfig(learning_rate=0.02, epochs=40, batch_size=8, seed=7),
    )

    for task_seed in range(args.tasks):
        # target blobs sit on a rotated axis so the source boundary is close
        # but not correct
        ds = generate_synthetic(150, 2, [[-1.4, -0.3], [1.4, 0.3]], 1.0,
                                seed=100 + task_seed)
        pool = split(ds, SplitSpec(0.6, 0.2, 0.2, seed=task_seed))
        warm = curve(base, ds, pool, args.epochs, seed=task_seed)
        cold_start = init(ModelConfig(feature_count=2, class_count=2,
                                      seed=200 + task_seed))
        cold = curve(cold_start, ds, pool, args.epochs, seed=task_seed)

        target = cold[-1]
        reached = next((i + 1 for i, acc in enumerate(warm) if acc >= target), None)
        print(f"task {task_seed}: cold final accuracy {target:.3f}, "
              f"warm start reaches it after "
              f"{reached if reached is not None else f'>{args.epochs}'} epoch(s)")
        marks = np.linspace(0, args.epochs - 1, 6).astype(int)
        print(f"  epochs      {'  '.join(f'{e + 1:5d}' for e in marks)}")
        print(f"  warm  acc   {'  '.join(f'{warm[e]:.3f}' for e in marks)}")
        print(f"  cold  acc   {'  '.join(f'{cold[e]:.3f}' for e in marks)}")


if __name__ == "__main__":
    main()
