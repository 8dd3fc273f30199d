import numpy as np

from uncloneable.streams import as_rng, chunk_sizes, map_chunks, pmap, set_threads, threads


def test_chunk_sizes():
    assert chunk_sizes(10, 4) == [4, 4, 2]
    assert sum(chunk_sizes(10_001)) == 10_001
    assert chunk_sizes(0) == []


def test_pmap_preserves_order():
    set_threads(4)
    try:
        assert pmap(lambda a, b: a * b, range(20), range(20)) == [i * i for i in range(20)]
    finally:
        set_threads(None)


def test_map_chunks_independent_of_threads():
    results = []
    for n in (1, 3):
        set_threads(n)
        results.append(map_chunks(lambda k, r: r.random(k).sum(), 10_000, np.random.default_rng(5), chunk=1000))
    set_threads(None)
    assert results[0] == results[1]
    assert threads() >= 1


def test_as_rng():
    g = np.random.default_rng(1)
    assert as_rng(g) is g
    assert as_rng(3).random() == np.random.default_rng(3).random()
