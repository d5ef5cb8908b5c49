"""Walk through the corpus pipeline: tokenize, distant-label, balance, split.

A handful of inline posts stand in for a JSONL dump. Hashtags from the lexicon
act as stance proxies and are stripped from the labelled text.
"""
from tempstance import HashtagLexicon, RawPost, distant_label, tokenize
from tempstance.corpus import balance_and_split, ingest


POSTS = [
    ("Equal PAY for equal work! #EqualPay", 2014),
    ("this gap is a myth, read the numbers #PayGapMyth", 2014),
    ("proud to march today #EqualPay #Progress", 2014),
    ("more red tape will not fix anything #PayGapMyth", 2014),
    ("interesting panel on wages today", 2014),
    ("both sides have a point?? #EqualPay #PayGapMyth", 2014),
    ("fair wages are overdue #EqualPay", 2014),
    ("quotas punish merit #PayGapMyth", 2014),
    ("equal work, equal paycheck #EqualPay", 2014),
    ("manufactured grievance #PayGapMyth", 2014),
    ("she deserves the same paycheck #EqualPay", 2015),
    ("stop subsidizing slogans #PayGapMyth", 2015),
    ("new study on compensation out today #EqualPay", 2015),
    ("the market already sorted this #PayGapMyth", 2015),
    ("signed the petition at lunch #EqualPay", 2015),
    ("another outrage piece, no thanks #PayGapMyth", 2015),
    ("negotiation training changed my salary #EqualPay", 2015),
    ("stats without controls are noise #PayGapMyth", 2015),
]

LEXICON = HashtagLexicon(support={"#equalpay"}, oppose={"#paygapmyth"})


def main():
    print("tokenizer on a sample post:")
    sample = "RT @ally: Equal PAY now!! https://t.co/x #EqualPay"
    print(f"  {sample!r}")
    print(f"  -> {tokenize(sample)}")

    print("\ndistant labelling:")
    for text, year in POSTS[:6]:
        post = distant_label(RawPost(text=text, year=year), LEXICON)
        verdict = f"{post.label.value}: {' '.join(post.tokens)}" if post else "skipped"
        print(f"  {text!r:58} -> {verdict}")

    result = ingest([(RawPost(text=t, year=y), None) for t, y in POSTS], LEXICON)
    print("\ningest stats (support/oppose are pre-balance):")
    print(result.stats.to_json())

    dataset = balance_and_split(result.labelled_by_year, train_frac=0.5, eval_frac=0.25, seed=1)
    for year in dataset.years:
        parts = dataset.year(year)
        print(f"year {year}: train {len(parts.train)}, eval {len(parts.eval)}, test {len(parts.test)}")


if __name__ == "__main__":
    main()
