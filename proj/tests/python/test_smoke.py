import random
from collections import OrderedDict

import pytest

import recflash


def test_timing_golden():
    t = recflash.TimingParams()
    assert recflash.command_address_time(t) == pytest.approx(0.115, abs=1e-9)
    assert recflash.data_out_time(t, 128) == pytest.approx(2.58, abs=1e-9)
    assert recflash.single_page_read_time(t, 2, 128, 4096) == pytest.approx(30.275, abs=1e-9)


def test_flash_config_round_trip():
    c = recflash.flash_preset("qlc")
    c.planes_per_die = 4
    back = recflash.parse_flash_config(c.serialize())
    assert back == c
    with pytest.raises(ValueError):
        recflash.parse_flash_config("page_size = 4096\nnonsense = 1\n")


def test_frequency_table_update():
    counts = [((0, r), 100 - 10 * r) for r in range(6)]
    t = recflash.FrequencyTable.build(1, 100, counts, 0.5)
    assert [k[1] for k in t.order()] == [0, 1, 2, 3, 4, 5]
    assert t.threshold() == (0, 2)
    s = t.adaptive_update([((0, 50), 95), ((0, 51), 1)])
    assert s["hot_region_keys"] == [(0, 0), (0, 50), (0, 1)]
    assert t.order()[-1] == (0, 51)
    t.audit()


def test_page_cache_matches_ordered_dict():
    rng = random.Random(5)
    cache = recflash.PageCache(4 * 16384, 16384)
    ref = OrderedDict()
    for _ in range(20000):
        p = rng.randrange(10)
        hit = p in ref
        if hit:
            ref.move_to_end(p)
        else:
            ref[p] = True
            if len(ref) > 4:
                ref.popitem(last=False)
        assert cache.access(p) == hit
    assert cache.hits + cache.misses == 20000


def test_trace_generation_deterministic():
    a = recflash.generate_trace("rmc1", 0.3, 20, seed=3, rows_per_table=50000)
    b = recflash.generate_trace("rmc1", 0.3, 20, seed=3, rows_per_table=50000)
    assert a == b
    assert len(a) == 20 and len(a[0]) == 8 * 80


def test_small_experiment():
    text = (
        "presets = rmc1\nnands = tlc\npolicies = sel, recflash\n"
        "unique_rates = K0\nqueries = 200\nrows_per_table = 50000\n"
    )
    rows = recflash.run_experiment(text)
    assert [r["policy"] for r in rows] == ["sel", "recflash"]
    assert all(r["status"] == "ok" for r in rows)
    sel, rf = rows
    assert rf["embedding_latency_us"] < sel["embedding_latency_us"]
    assert recflash.experiment_csv(text) == recflash.experiment_csv(text)


def test_bad_experiment_reports_line():
    with pytest.raises(recflash.ConfigError, match="line 2"):
        recflash.describe_experiment("queries = 5\nwhatever = 1\n")
