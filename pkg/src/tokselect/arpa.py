"""ARPA text serialization of back-off models.

Tokens are rendered as decimal integers with the begin/end sentinels as
``<s>`` and ``</s>``. Pure-BOS contexts (which carry a back-off weight but no
event probability) are written with the conventional -99 dummy log10
probability. Values are printed with 7 decimal places so a write/read
round-trip reproduces queries well inside 1e-6 natural-log per token.
"""

from __future__ import annotations

from pathlib import Path

from .errors import FormatError
from .ngram import Gram, NgramModel

_BOS_TEXT = "<s>"
_EOS_TEXT = "</s>"
_DUMMY_LOG10 = -99.0


def _render(gram: Gram, bos: int, eos: int) -> str:
    parts = []
    for t in gram:
        if t == bos:
            parts.append(_BOS_TEXT)
        elif t == eos:
            parts.append(_EOS_TEXT)
        else:
            parts.append(str(t))
    return " ".join(parts)


def write_arpa(model: NgramModel, path: str | Path) -> None:
    """Write the model in ARPA format with deterministic entry order."""
    bos, eos = model.bos, model.eos
    sections: dict[int, list[tuple[Gram, float, float | None]]] = {
        n: [] for n in range(1, model.order + 1)
    }
    for gram, logp in model.probs.items():
        sections[len(gram)].append((gram, logp, model.bows.get(gram)))
    for context, bow in model.bows.items():
        if context not in model.probs:  # pure-BOS runs: back-off weight only
            sections[len(context)].append((context, _DUMMY_LOG10, bow))
    for entries in sections.values():
        entries.sort(key=lambda e: e[0])

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for n in range(1, model.order + 1):
            fh.write(f"ngram {n}={len(sections[n])}\n")
        for n in range(1, model.order + 1):
            fh.write(f"\n\\{n}-grams:\n")
            for gram, logp, bow in sections[n]:
                line = f"{logp:.7f}\t{_render(gram, bos, eos)}"
                if bow is not None:
                    line += f"\t{bow:.7f}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def _parse_token(text: str, lineno: int) -> tuple[str | int]:
    if text == _BOS_TEXT:
        return "bos"
    if text == _EOS_TEXT:
        return "eos"
    try:
        return int(text)
    except ValueError:
        raise FormatError(f"token {text!r} is not an integer or sentinel", line=lineno) from None


def read_arpa(path: str | Path) -> NgramModel:
    """Parse an ARPA file back into a queryable model.

    The vocabulary size is recovered from the unigram section (this writer
    always emits every event id); section counts must match the header.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    # locate \data\ header
    pos = 0
    while pos < len(lines) and lines[pos].strip() != "\\data\\":
        if lines[pos].strip():
            raise FormatError("expected \\data\\ header", line=pos + 1)
        pos += 1
    if pos == len(lines):
        raise FormatError("missing \\data\\ header")
    pos += 1
    declared: dict[int, int] = {}
    while pos < len(lines):
        line = lines[pos].strip()
        if not line:
            pos += 1
            continue
        if line.startswith("\\"):
            break
        if not line.startswith("ngram "):
            raise FormatError(f"unexpected line in \\data\\ section: {line!r}", line=pos + 1)
        try:
            n_text, count_text = line[len("ngram ") :].split("=")
            declared[int(n_text)] = int(count_text)
        except ValueError:
            raise FormatError(f"malformed ngram count: {line!r}", line=pos + 1) from None
        pos += 1
    if not declared:
        raise FormatError("\\data\\ section declares no n-gram orders")
    order = max(declared)
    if sorted(declared) != list(range(1, order + 1)):
        raise FormatError(f"\\data\\ declares non-contiguous orders {sorted(declared)}")

    raw_entries: dict[int, list[tuple[int, tuple, float, float | None]]] = {n: [] for n in declared}
    current = None
    for lineno in range(pos, len(lines)):
        line = lines[lineno].strip()
        if not line:
            continue
        if line == "\\end\\":
            current = "end"
            continue
        if line.startswith("\\") and line.endswith("-grams:"):
            try:
                current = int(line[1:].split("-")[0])
            except ValueError:
                raise FormatError(f"malformed section header {line!r}", line=lineno + 1) from None
            if current not in declared:
                raise FormatError(f"section \\{current}-grams: not declared in header", line=lineno + 1)
            continue
        if current == "end":
            raise FormatError("content after \\end\\", line=lineno + 1)
        if current is None:
            raise FormatError(f"entry outside any section: {line!r}", line=lineno + 1)
        fields = line.split("\t")
        if len(fields) == 1:
            fields = line.split()
            if len(fields) not in (current + 1, current + 2):
                raise FormatError(f"malformed entry: {line!r}", line=lineno + 1)
            fields = [fields[0], " ".join(fields[1 : 1 + current])] + fields[1 + current :]
        if len(fields) not in (2, 3):
            raise FormatError(f"malformed entry: {line!r}", line=lineno + 1)
        try:
            logp = float(fields[0])
            bow = float(fields[2]) if len(fields) == 3 else None
        except ValueError:
            raise FormatError(f"malformed numeric field: {line!r}", line=lineno + 1) from None
        toks = tuple(_parse_token(t, lineno + 1) for t in fields[1].split())
        if len(toks) != current:
            raise FormatError(
                f"entry has {len(toks)} tokens in the \\{current}-grams: section", line=lineno + 1
            )
        raw_entries[current].append((lineno + 1, toks, logp, bow))
    if current != "end":
        raise FormatError("missing \\end\\ marker")

    for n, entries in raw_entries.items():
        if len(entries) != declared[n]:
            raise FormatError(
                f"header declares {declared[n]} {n}-grams but body has {len(entries)}"
            )

    int_unigrams = [t[0] for _, t, _, _ in raw_entries[1] if isinstance(t[0], int)]
    if not int_unigrams:
        raise FormatError("unigram section contains no integer tokens")
    vocab_size = max(int_unigrams) + 1
    bos, eos = vocab_size, vocab_size + 1

    def resolve(toks) -> Gram:
        return tuple(bos if t == "bos" else eos if t == "eos" else t for t in toks)

    probs: dict[Gram, float] = {}
    bows: dict[Gram, float] = {}
    for n, entries in raw_entries.items():
        for lineno, toks, logp, bow in entries:
            gram = resolve(toks)
            if any(isinstance(t, int) and t >= vocab_size for t in toks):
                raise FormatError(f"token id exceeds inferred vocabulary", line=lineno)
            pure_bos = all(t == bos for t in gram)
            if pure_bos:
                if bow is None:
                    raise FormatError("BOS context entry must carry a back-off weight", line=lineno)
                bows[gram] = bow
                continue
            if gram in probs:
                raise FormatError(f"duplicate n-gram entry", line=lineno)
            probs[gram] = logp
            if bow is not None:
                bows[gram] = bow

    model = NgramModel(order=order, vocab_size=vocab_size, probs=probs, bows=bows)
    missing = [w for w in model.events() if (w,) not in probs]
    if missing:
        raise FormatError(f"unigram section is missing {len(missing)} event(s)")
    return model
