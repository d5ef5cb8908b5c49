"""Generate a drifting synthetic corpus and inspect its vocabulary decay.

Each year swaps a fraction of surface forms for fresh ones and reassigns a
fraction of stance markers, so year-to-year vocabulary overlap falls off with
temporal distance just like in real longitudinal collections.
"""
import numpy as np

from tempstance import SyntheticDriftConfig, generate_synthetic_corpus, jaccard_matrix


def main():
    config = SyntheticDriftConfig(
        num_years=6,
        docs_per_year=800,
        base_vocab_size=400,
        lexical_drift_rate=0.15,
        association_drift_rate=0.1,
        stance_marker_count=12,
        seed=7,
    )
    slices, dataset = generate_synthetic_corpus(config)

    print("sample documents from the first and last slice:")
    print("  ", " ".join(slices[0].documents[0]))
    print("  ", " ".join(slices[-1].documents[0]))

    vocabs = {sl.year: {tok for doc in sl.documents for tok in doc} for sl in slices}
    years, mat = jaccard_matrix(vocabs)
    print("\nvocabulary Jaccard similarity by year:")
    print("      " + "  ".join(f"{y}" for y in years))
    for i, year in enumerate(years):
        print(f"{year}  " + "  ".join(f"{v:.2f}" for v in mat[i]))

    gaps = [float(np.mean([mat[i, i + g] for i in range(len(years) - g)])) for g in range(len(years))]
    print("\nmean similarity by gap:", ", ".join(f"g{g}={v:.3f}" for g, v in enumerate(gaps)))

    year = dataset.years[0]
    parts = dataset.year(year)
    print(f"\nlabelled splits for {year}: train {len(parts.train)}, eval {len(parts.eval)}, test {len(parts.test)}")
    print("a labelled post:", " ".join(parts.train[0].tokens), "->", parts.train[0].label.value)


if __name__ == "__main__":
    main()
