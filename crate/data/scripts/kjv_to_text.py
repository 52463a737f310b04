"""Rebuild data/kjv/ from the `kjv` npm package (json/verses-1769.json).

Usage: python3 kjv_to_text.py path/to/verses-1769.json out_dir

One file per book, numbered in canonical order. A leading `# ` on a verse
starts a new paragraph; paragraphs are joined verses separated by a blank
line. Square brackets (italic markers) are dropped.
"""

import collections
import json
import os
import sys


def main(src, out):
    with open(src) as f:
        verses = json.load(f, object_pairs_hook=collections.OrderedDict)
    books = collections.OrderedDict()
    for ref, text in verses.items():
        book, _ = ref.rsplit(" ", 1)
        books.setdefault(book, []).append(text)
    os.makedirs(out, exist_ok=True)
    for i, (book, texts) in enumerate(books.items(), 1):
        paras, cur = [], []
        for t in texts:
            t = t.replace("[", "").replace("]", "")
            if t.startswith("# "):
                if cur:
                    paras.append(" ".join(cur))
                    cur = []
                t = t[2:]
            cur.append(t)
        if cur:
            paras.append(" ".join(cur))
        name = "%02d-%s.txt" % (i, book.lower().replace(" ", "-"))
        with open(os.path.join(out, name), "w") as f:
            f.write(book + "\n\n" + "\n\n".join(paras) + "\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
