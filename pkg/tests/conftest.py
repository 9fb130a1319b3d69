import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mei.corpus import Span  # noqa: E402
from mei.derive import MajorEntity, MeiDocument  # noqa: E402

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"


def random_mei_doc(rng: random.Random, n_entities: int, n_spans: int, n_tokens: int = 40,
                   doc_id: str = "d") -> MeiDocument:
    """Random valid MeiDocument; every entity has at least one gold mention."""
    spans = set()
    while len(spans) < n_spans:
        s = rng.randrange(n_tokens)
        spans.add(Span(s, min(n_tokens - 1, s + rng.randrange(3))))
    spans = sorted(spans)
    rng.shuffle(spans)
    gold = [(spans[i], i + 1) for i in range(n_entities)]
    gold += [(s, rng.randint(1, n_entities)) for s in spans[n_entities: n_entities + rng.randint(0, n_spans - n_entities)]]
    used = {s for s, _ in gold}
    other = [s for s in spans if s not in used]
    tokens = tuple(f"w{i}" for i in range(n_tokens))
    entities = tuple(MajorEntity(i, f"ent {i}", None, sum(1 for _, e in gold if e == i))
                     for i in range(1, n_entities + 1))
    return MeiDocument(doc_id, tokens, ((0, n_tokens),), entities, tuple(gold), tuple(other))


@pytest.fixture
def rng():
    return random.Random(1234)
