"""The fixed text-CNN stance classifier: encode, train, verify gradients.

Posts become max_len x dim matrices of embedding rows (zero-padded, OOV words
zeroed). One convolution bank with ReLU and max-pooling feeds a dense softmax;
all gradients are hand-derived and checked against finite differences.
"""
import numpy as np

from tempstance import (
    ClassifierConfig,
    EmbeddingConfig,
    SyntheticDriftConfig,
    encode_posts,
    generate_synthetic_corpus,
    gradients_check,
    macro_f1,
    predict,
    train_cbow,
    train_classifier,
)
from tempstance.classifier import TextCNN


def main():
    slices, labelled = generate_synthetic_corpus(
        SyntheticDriftConfig(
            num_years=1,
            docs_per_year=1500,
            base_vocab_size=300,
            stance_marker_count=10,
            seed=5,
        )
    )
    emb = train_cbow(
        slices[0].documents,
        EmbeddingConfig(dim=32, window=4, negatives=4, epochs=8, initial_lr=0.05, min_count=2, seed=1),
    )
    look = emb.lookup()

    year = labelled.years[0]
    parts = labelled.year(year)
    config = ClassifierConfig(lr=1e-2, seed=1)
    train = encode_posts(parts.train, look, config.max_len)
    evl = encode_posts(parts.eval, look, config.max_len)
    test = encode_posts(parts.test, look, config.max_len)
    print(f"encoded {len(train)} train / {len(evl)} eval / {len(test)} test posts "
          f"({look.stats.oov_count} OOV tokens)")

    cnn = train_classifier(train, evl, config)
    print("train loss by epoch:", ", ".join(f"{v:.3f}" for v in cnn.train_loss_history))
    print("eval macro-F1 by epoch:", ", ".join(f"{v:.3f}" for v in cnn.eval_f1_history))
    score = macro_f1(predict(cnn, test), [p.label for p in test])
    print(f"test macro-F1: {score:.3f}")

    small = TextCNN.init(
        ClassifierConfig(num_filters=4, kernel_width=3, max_len=8, lr=0.01, seed=0),
        dim=6,
        rng=np.random.default_rng(0),
    )
    batch = np.random.default_rng(1).normal(0, 1, (5, 8, 6))
    labels = np.random.default_rng(2).integers(0, 2, 5)
    err = gradients_check(small, batch, labels)
    print(f"\nbackprop vs finite differences on a small model: max relative error {err:.2e}")


if __name__ == "__main__":
    main()
