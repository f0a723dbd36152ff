import re
from typing import List

_TOKEN = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> List[str]:
    """Lowercase, split on whitespace, and give every punctuation character its own token.

    >>> tokenize("What is X?")
    ['what', 'is', 'x', '?']
    >>> tokenize("a  b")
    ['a', 'b']
    """
    return _TOKEN.findall(text.lower())
