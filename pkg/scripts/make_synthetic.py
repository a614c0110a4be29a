"""Write a synthetic polarity corpus plus a ready-to-run config.

    python3 scripts/make_synthetic.py runs/synth --seed 0
    faithkit train --config runs/synth/experiment.cfg
"""

import argparse
import os

from faithkit.synthetic import make_corpus, write_corpus

CONFIG = """\
# generated by make_synthetic.py; paths are relative to this file
train_path = train.tsv
dev_path = dev.tsv
test_path = test.tsv
embeddings_path = vectors.txt
synonyms_path = synonyms.tsv
checkpoint_path = model.ckpt
output_path = report.json
seed = {seed}
samples_per_class = {per_class}
curve_max_length = 40
"""


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-train", type=int, default=600)
    parser.add_argument("--n-test", type=int, default=200)
    parser.add_argument("--max-len", type=int, default=30)
    parser.add_argument("--per-class", type=int, default=50)
    args = parser.parse_args()

    corpus = make_corpus(args.seed, n_train=args.n_train, n_test=args.n_test, max_len=args.max_len)
    paths = write_corpus(corpus, args.out_dir)
    cfg_path = os.path.join(args.out_dir, "experiment.cfg")
    with open(cfg_path, "w", encoding="utf-8") as fh:
        fh.write(CONFIG.format(seed=args.seed, per_class=args.per_class))
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    print(f"config: {cfg_path}")


if __name__ == "__main__":
    main()
