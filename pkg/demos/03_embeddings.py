"""Train CBOW embeddings, inspect neighborhoods, grow the model incrementally.

Words from the same synthetic topic co-occur, so they end up close in the
trained space. A later slice introduces fresh surface forms; the incremental
update adds them without disturbing existing word ids.
"""
import numpy as np

from tempstance import EmbeddingConfig, SyntheticDriftConfig, generate_synthetic_corpus, train_cbow, update_incremental
from tempstance.embedding import load_model, save_model


def nearest(model, word, k=5):
    idx = model.vocab.id_of(word)
    mat = model.input_matrix
    norms = np.linalg.norm(mat, axis=1)
    sims = mat @ mat[idx] / np.maximum(norms * norms[idx], 1e-12)
    order = np.argsort(-sims)
    return [(model.vocab.id_to_word[i], float(sims[i])) for i in order if i != idx][:k]


def main():
    slices, _ = generate_synthetic_corpus(
        SyntheticDriftConfig(
            num_years=2,
            docs_per_year=1500,
            base_vocab_size=300,
            lexical_drift_rate=0.2,
            stance_marker_count=10,
            seed=3,
        )
    )
    config = EmbeddingConfig(dim=32, window=4, negatives=4, epochs=8, initial_lr=0.05, min_count=2, seed=1)
    model = train_cbow(slices[0].documents, config)
    print(f"trained on year {slices[0].year}: |V| = {len(model.vocab)}")
    print("per-epoch mean loss:", ", ".join(f"{v:.3f}" for v in model.epoch_losses))

    probe = model.vocab.id_to_word[30]
    print(f"\nnearest neighbours of {probe!r}:")
    for word, sim in nearest(model, probe):
        print(f"  {word:12s} cos {sim:.3f}")

    updated = update_incremental(model, slices[1], config)
    fresh = len(updated.vocab) - len(model.vocab)
    print(f"\nincremental update with year {slices[1].year}: +{fresh} new words, "
          f"old ids preserved: {updated.vocab.id_of(probe) == model.vocab.id_of(probe)}")

    path = "/tmp/tempstance_demo_model.txt"
    save_model(updated, path)
    reloaded = load_model(path)
    drift = np.abs(reloaded.input_matrix - updated.input_matrix).max()
    print(f"save/load round trip: max component error {drift:.2e}")


if __name__ == "__main__":
    main()
