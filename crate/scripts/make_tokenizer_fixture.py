"""Freeze reference GPT-2 tokenizations for the Rust tokenizer tests.

Uses the Hugging Face slow GPT2Tokenizer as an independent implementation.
"""
import json
import sys

from transformers import GPT2Tokenizer

tokenizer_dir, out = sys.argv[1:3]
tok = GPT2Tokenizer.from_pretrained(tokenizer_dir)

texts = [
    " remained",
    "The girl fed the lamb remained relatively calm before the sunset in silence.",
    "The girl who was fed the lamb remained relatively calm before the sunset in silence.",
    "When the girl attacked, the lamb remained relatively calm despite the sudden noise.",
    "The bus driver that the kids followed waited patiently at dawn.",
    "Janet charmed the executive of the assistants who decides almost everything during long weekly meetings.",
    "It's 2024 and we've got  double  spaces\nand newlines\t\ttabs.",
    "naïve café — “quotes” 日本語 🙂",
    "   leading and trailing   ",
    "don't they'll I'd we're you've",
]
cases = [{"text": t, "ids": tok.encode(t)} for t in texts]
with open(out, "w", encoding="utf-8") as f:
    json.dump(cases, f, ensure_ascii=False, indent=1)
