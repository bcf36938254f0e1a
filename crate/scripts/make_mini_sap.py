"""Write a small garden-path reading-time fixture in the long CSV format.

Sentences are hand-written pairs for each phenomenon plus fillers; reading
times are a deterministic function of word length, position and condition.
"""
import csv
import sys

PAIRS = {
    "MVRR": [
        ("The horse raced past the barn fell.", "The horse that was raced past the barn fell.", "fell."),
        ("The boat sailed down the river sank.", "The boat that was sailed down the river sank.", "sank."),
        ("The man sent the gift smiled.", "The man who was sent the gift smiled.", "smiled."),
        ("The dog walked in the park barked.", "The dog that was walked in the park barked.", "barked."),
    ],
    "NPS": [
        ("The man knew the girl was lost.", "The man knew that the girl was lost.", "was"),
        ("The cook heard the news was bad.", "The cook heard that the news was bad.", "was"),
        ("Ann found the book was gone.", "Ann found that the book was gone.", "was"),
        ("We saw the plan had failed.", "We saw that the plan had failed.", "had"),
    ],
    "NPZ": [
        ("When the dog ate the food fell.", "When the dog ate, the food fell.", "fell."),
        ("As Tom left the room got cold.", "As Tom left, the room got cold.", "got"),
        ("While Sue sang the song ended.", "While Sue sang, the song ended.", "ended."),
        ("After we ran the race began.", "After we ran, the race began.", "began."),
    ],
    "RC": [
        ("The boy that the girl saw ran.", "The boy that saw the girl ran.", "saw"),
        ("The cat that the dog bit hid.", "The cat that bit the dog hid.", "bit"),
        ("The nun that the man met left.", "The nun that met the man left.", "met"),
        ("The cop that the kid hit fell.", "The cop that hit the kid fell.", "hit"),
    ],
    "Attachment": [
        ("The son of the king who was ill left.", "The sons of the king who were ill left.", "was|were"),
        ("The aunt of the boy who was sad came.", "The aunts of the boy who were sad came.", "was|were"),
        ("The dog of the man who was old died.", "The dogs of the man who were old died.", "was|were"),
        ("The wife of the cop who was hurt wept.", "The wives of the cop who were hurt wept.", "was|were"),
    ],
}

FILLERS = [
    "The sun rose over the hills.",
    "A girl fed the lamb at dawn.",
    "My aunt baked a pie for us.",
    "The old car would not start.",
    "He read the paper in bed.",
    "Birds sang in the tall trees.",
    "She left her hat on the bus.",
    "The kids ran to the beach.",
    "We ate rice and fish today.",
    "The bell rang twice at noon.",
    "A red kite flew over the lake.",
    "Tom lost his keys at work.",
    "The rain fell all night long.",
    "Her cat slept on the warm rug.",
]


def rt(item, idx, word, bump):
    return 250 + 14 * len(word.strip(".,")) + (item * 7 + idx * 13) % 23 + bump


def main(path):
    rows = []
    item = 0
    for phen, pairs in PAIRS.items():
        for plus, minus, dis in pairs:
            item += 1
            dis_plus, _, dis_minus = dis.partition("|")
            for cond, text, dis in (("+", plus, dis_plus), ("-", minus, dis_minus or dis_plus)):
                words = text.split()
                # The disambiguating word is the first match after word 2.
                t = next(i for i, w in enumerate(words, 1) if w == dis and i > 2)
                for i, w in enumerate(words, 1):
                    bump = 70 if cond == "+" and i in (t, t + 1) else 0
                    rows.append((f"p{item}", cond, phen, i, w, rt(item, i, w, bump), int(i == t)))
    for k, text in enumerate(FILLERS, 1):
        for i, w in enumerate(text.split(), 1):
            rows.append((f"f{k}", "filler", "", i, w, rt(100 + k, i, w, 0), 0))
    with open(path, "w", newline="") as f:
        out = csv.writer(f, lineterminator="\n")
        out.writerow(["item_id", "condition", "phenomenon", "word_index", "word_text", "rt_ms", "is_disambiguating"])
        out.writerows(rows)


if __name__ == "__main__":
    main(sys.argv[1])
