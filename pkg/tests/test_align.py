import random

from hypothesis import given, settings
from hypothesis import strategies as st

from mei.llm.align import align, alignment_score, target_to_source


def brute_nw(a, b):
    """Plain-Python reference for the DP score."""
    n, m = len(a), len(b)
    H = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        H[i][0] = -i
    for j in range(m + 1):
        H[0][j] = -j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            s = 1 if a[i - 1].lower().strip(".,") == b[j - 1].lower().strip(".,") else -1
            H[i][j] = max(H[i - 1][j - 1] + s, H[i - 1][j] - 1, H[i][j - 1] - 1)
    return H[n][m]


def test_identity_alignment():
    toks = ["the", "lady", "in", "the", "BMW"]
    pairs, score = align(toks, toks)
    assert pairs == [(i, i) for i in range(5)]
    assert score == 5


def test_one_omitted_token():
    pairs, score = align(["a", "b", "c", "d"], ["a", "c", "d"])
    assert pairs == [(0, 0), (1, None), (2, 1), (3, 2)]
    assert score == 2
    assert target_to_source(["a", "b", "c", "d"], ["a", "c", "d"]) == {0: 0, 1: 2, 2: 3}


def test_case_and_punctuation_insensitive():
    assert alignment_score(["Mom", "said"], ["mom..", "SAID"]) == 2


def test_empty_sequences():
    assert align([], ["x", "y"]) == ([(None, 0), (None, 1)], -2)
    assert align(["x"], []) == ([(0, None)], -1)


def test_traceback_prefers_diagonal_then_up():
    # one mismatch or two gaps score the same; the diagonal wins
    assert align(["a"], ["b"])[0] == [(0, 0)]
    # with a spare source token the up move is used before left
    pairs, _ = align(["x", "a"], ["a"])
    assert pairs == [(0, None), (1, 0)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "c", "D", "e."]), max_size=10),
       st.lists(st.sampled_from(["a", "B", "c", "d", "x"]), max_size=10))
def test_score_matches_reference(a, b):
    pairs, score = align(a, b)
    assert score == brute_nw(a, b)
    # the traceback is a complete, monotone alignment
    assert [i for i, _ in pairs if i is not None] == list(range(len(a)))
    assert [j for _, j in pairs if j is not None] == list(range(len(b)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(min_size=1, max_size=4), min_size=1, max_size=30))
def test_self_alignment_score_is_length(words):
    assert alignment_score(words, words) == len(words)


def test_long_inputs_are_fast():
    rng = random.Random(0)
    a = [f"w{rng.randrange(300)}" for _ in range(2000)]
    b = a[:1000] + a[1001:]
    assert alignment_score(a, b) == len(b) - 1
