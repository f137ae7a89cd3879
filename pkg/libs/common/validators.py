"""
Input validators for bangtensor names and arity words
"""
import re

RESERVED_WORDS = frozenset(
    {
        "id",
        "gen",
        "axiom",
        "theorem",
        "proof",
        "qed",
        "step",
        "by",
        "equiv",
        "apply",
        "prod",
        "with",
        "box",
        "in",
        "sym",
        "trans",
        "hyp",
        "induction",
        "on",
        "base",
        "rename",
        "boxrename",
        "exp",
        "kill",
        "copy",
        "drop",
        "weaken",
        "op",
    }
)

EDGE_NAME_PATTERN = r"[a-z][A-Za-z0-9_]*(?:\.[0-9]+)?"
BOX_NAME_PATTERN = r"[A-Z][A-Za-z0-9_]*(?:\.[0-9]+)?"
GENERATOR_NAME_PATTERN = r"[a-z][A-Za-z0-9_]*"


def validate_edge_name(name: str) -> bool:
    """
    Validate an edge name

    Format: lowercase initial, then letters, digits or underscores, with an
    optional freshness suffix `.k`

    Args:
        name: Edge name to validate

    Returns:
        True if valid, False otherwise
    """
    if not name or not isinstance(name, str):
        return False
    return bool(re.fullmatch(EDGE_NAME_PATTERN, name))


def validate_box_name(name: str) -> bool:
    """
    Validate a !-box name

    Format: uppercase initial, then letters, digits or underscores, with an
    optional freshness suffix `.k`
    """
    if not name or not isinstance(name, str):
        return False
    return bool(re.fullmatch(BOX_NAME_PATTERN, name))


def validate_generator_name(name: str) -> bool:
    """Validate a generator name (lowercase identifier, not a keyword)"""
    if not name or not isinstance(name, str):
        return False
    if name in RESERVED_WORDS:
        return False
    return bool(re.fullmatch(GENERATOR_NAME_PATTERN, name))


def validate_arity_word(word: str) -> bool:
    """Validate a concrete arity word over ^ (output) and v (input)"""
    if not isinstance(word, str):
        return False
    return bool(re.fullmatch(r"[\^v]*", word))


def validate_arity_pattern(pattern: str) -> bool:
    """
    Validate an arity pattern

    Patterns extend arity words with parenthesized groups and a postfix `*`
    meaning "zero or more repetitions".

    Args:
        pattern: Pattern such as `^vv` or `^v*` or `^(vv)*`

    Returns:
        True if valid, False otherwise
    """
    if not isinstance(pattern, str):
        return False
    if not re.fullmatch(r"[\^v()*]*", pattern):
        return False

    depth = 0
    previous = ""
    for char in pattern:
        if char == "(":
            depth += 1
        elif char == ")":
            depth -= 1
            if depth < 0 or previous == "(":
                return False
        elif char == "*" and previous in ("", "(", "*"):
            return False
        previous = char
    return depth == 0
