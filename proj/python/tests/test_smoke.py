import math
import pathlib
import struct

import numpy as np
import pytest

import sset

ROOT = pathlib.Path(__file__).resolve().parents[2]
TOY = ROOT / "data" / "toy"
HAND = ROOT / "tests" / "fixtures" / "eval_hand"


def test_embedding_round_trip(tmp_path):
    values = np.random.default_rng(0).standard_normal((7, 5)).astype(np.float32)
    path = tmp_path / "entity.emb"
    sset.write_embedding_file(path, "entity", values)
    kind, back = sset.read_embedding_file(path)
    assert kind == "entity"
    assert back.dtype == np.float32
    assert back.tobytes() == values.tobytes()
    raw = path.read_bytes()
    assert raw[:8] == b"SSETEMB1"
    assert struct.unpack("<4I", raw[8:24]) == (1, 0, 7, 5)


def test_embedding_version_mismatch(tmp_path):
    path = tmp_path / "type.emb"
    sset.write_embedding_file(path, "type", np.zeros((2, 3), np.float32))
    raw = bytearray(path.read_bytes())
    raw[8] = 2
    path.write_bytes(bytes(raw))
    with pytest.raises(sset.FormatError):
        sset.read_embedding_file(path)


def test_bad_kind_rejected(tmp_path):
    with pytest.raises(ValueError):
        sset.write_embedding_file(tmp_path / "x.emb", "word", np.zeros((1, 1), np.float32))


def test_probability_files(tmp_path):
    probs = np.random.default_rng(1).uniform(size=(5, 4)).astype(np.float32)
    dense = tmp_path / "p.prob"
    sset.write_probability_file(dense, probs)
    mode, back = sset.read_probability_file(dense)
    assert mode == "dense"
    assert back.tobytes() == probs.tobytes()
    sset.check_probability_file(dense, 5, 4)
    with pytest.raises(sset.FormatError):
        sset.check_probability_file(dense, 6, 4)

    sparse = tmp_path / "s.prob"
    sset.write_topk_probability_file(sparse, probs, 2)
    mode, back = sset.read_probability_file(sparse, floor=-1.0)
    assert mode == "sparse_topk"
    for row, full in zip(back, probs):
        kept = np.flatnonzero(row >= 0)
        assert len(kept) == 2
        assert set(kept) == set(np.argsort(-full, kind="stable")[:2])
        np.testing.assert_array_equal(row[kept], full[kept])


def test_out_of_range_probability_is_rejected(tmp_path):
    path = tmp_path / "bad.prob"
    sset.write_probability_file(path, np.array([[0.5, 1.5]], np.float32))
    with pytest.raises(sset.FormatError):
        sset.check_probability_file(path)


def test_toy_graph():
    g = sset.open_graph(TOY)
    assert (g.num_entities, g.num_relations, g.num_types, g.num_triples) == (5, 3, 4, 5)
    assert g.num_assertions("train") == 6
    assert g.entities[0] == "e0"
    assert g.entity_text(0)[0] == "Ada"
    assert g.known_types(1) == [1, 2]


def test_load_error_names_file(tmp_path):
    for name in ("entity_text.tsv", "relation_text.tsv", "type_text.tsv", "types_train.tsv",
                 "types_valid.tsv", "types_test.tsv"):
        (tmp_path / name).write_text((TOY / name).read_text())
    (tmp_path / "triples.tsv").write_text("e0\tr0\tnobody\n")
    with pytest.raises(sset.LoadError, match="triples.tsv"):
        sset.open_graph(tmp_path)


def test_reweight():
    assert sset.reweight(0.0) == 0.0
    assert sset.reweight(1.0) == 0.0
    assert sset.reweight(0.5) == 1.0
    assert math.isclose(sset.reweight(0.25), 0.625)
    with pytest.raises(ValueError):
        sset.reweight(1.5)


def test_rerank_example():
    q = np.array([0.9, 0.8, 0.2, 0.1], np.float32)
    p = np.array([0.1, 0.95, 0.99, 0.0], np.float32)
    z = sset.rerank(p, q, alpha=0.5, k=2)
    np.testing.assert_allclose(z, [0.5, 0.875, 0.2, 0.1], rtol=1e-6)
    assert int(np.argmax(z)) == 1


def test_metrics():
    r = sset.summarize_ranks([1, 2, 4])
    assert math.isclose(r["mrr"], 0.583333, abs_tol=1e-6)
    assert math.isclose(r["mr"], 7 / 3)
    assert sset.filtered_rank(np.array([0.9, 0.5, 0.1], np.float32), 1) == 2
    assert sset.filtered_rank(np.array([0.9, 0.5, 0.1], np.float32), 1, [0]) == 1


def test_evaluate_hand_fixture():
    g = sset.open_graph(HAND)
    _, scores = sset.read_probability_file(HAND / "scores.prob")
    report = sset.evaluate(g, scores)
    assert report["ranks"] == [1, 2, 4]
    assert math.isclose(report["hit1"], 1 / 3)
