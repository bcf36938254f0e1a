"""Write a frozen English frequency lexicon snapshot (word<TAB>log10_freq).

Frequencies come from the `wordfreq` package (data CC BY-SA 4.0); the value is
log10 of the per-word occurrence proportion.
"""
import math
import sys

import wordfreq

n = int(sys.argv[2]) if len(sys.argv) > 2 else 40000
rows = {}
for w in wordfreq.top_n_list("en", n, wordlist="best"):
    if not w or "\t" in w:
        continue
    f = wordfreq.word_frequency(w, "en", wordlist="best")
    if f > 0:
        rows[w] = math.log10(f)
with open(sys.argv[1], "w", encoding="utf-8") as out:
    for w in sorted(rows):
        out.write(f"{w}\t{rows[w]:.6f}\n")
