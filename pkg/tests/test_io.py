import numpy as np
import pytest

from xaibench import dataset, io
from xaibench.compiler import compile_model
from xaibench.io import FormatError, read_t3, write_t3
from xaibench.network import forward


def test_t3_round_trip_3d(tmp_path):
    x = np.random.default_rng(0).random((5, 7, 3))
    write_t3(tmp_path / "a.t3", x)
    back = read_t3(tmp_path / "a.t3")
    assert back.shape == (5, 7, 3)
    assert np.allclose(back, x, atol=1e-7)  # float32 payload


def test_t3_promotes_low_rank(tmp_path):
    write_t3(tmp_path / "v.t3", np.arange(4.0))
    assert read_t3(tmp_path / "v.t3").shape == (1, 1, 4)
    write_t3(tmp_path / "m.t3", np.ones((2, 3)))
    assert read_t3(tmp_path / "m.t3").shape == (2, 3, 1)


def test_t3_rejects_rank_4(tmp_path):
    with pytest.raises(FormatError, match="4-d"):
        write_t3(tmp_path / "x.t3", np.zeros((1, 1, 1, 1)))


def test_t3_truncated_header(tmp_path):
    (tmp_path / "bad.t3").write_bytes(b"\x01\x00")
    with pytest.raises(FormatError, match="truncated"):
        read_t3(tmp_path / "bad.t3")


def test_t3_truncated_payload(tmp_path):
    p = tmp_path / "bad.t3"
    write_t3(p, np.ones((2, 2, 1)))
    data = p.read_bytes()
    p.write_bytes(data[:-4])
    with pytest.raises(FormatError, match="payload"):
        read_t3(p)


def test_sidecar_rejects_unknown_role(tmp_path):
    with pytest.raises(FormatError, match="role"):
        io.write_sidecar(tmp_path / "x.t3", "m0_c0_000", 0, 0, "mask")


def test_model_round_trip(tmp_path, models):
    io.save_model(models[1], tmp_path / "model1")
    loaded = io.load_model(tmp_path / "model1")
    assert loaded.concept_id == 1
    assert [l.name for l in loaded.layers] == [l.name for l in models[1].layers]
    x = np.random.default_rng(3).random((36, 36, 3))
    orig, _ = forward(models[1], x)
    back, _ = forward(loaded, x)
    assert np.array_equal(orig, back)  # weights are float32-exact values


def test_model_manifest_rejects_unknown_layer(tmp_path, models):
    io.save_model(models[0], tmp_path / "m")
    manifest = (tmp_path / "m" / "model.json").read_text()
    (tmp_path / "m" / "model.json").write_text(
        manifest.replace('"MaxPool"', '"AvgPool"'))
    with pytest.raises(FormatError, match="AvgPool"):
        io.load_model(tmp_path / "m")


def test_example_id_format():
    assert io.example_id(2, 1, 7) == "m2_c1_007"


def test_corpus_round_trip(tmp_path, small_corpus):
    io.save_corpus(small_corpus, root_seed=0, out_dir=tmp_path / "corpus")
    records = io.load_corpus(tmp_path / "corpus")
    flat = [ex for exs in small_corpus.values() for ex in exs]
    assert len(records) == len(flat)
    by_id = {io.example_id(ex.model_id, ex.class_label, ex.index): ex
             for ex in flat}
    for rec in records:
        ex = by_id[rec["example_id"]]
        assert rec["model_id"] == ex.model_id
        assert rec["class_label"] == ex.class_label
        assert tuple(rec["offsets"]) == ex.offsets
        assert np.allclose(rec["image"], ex.image, atol=1e-7)
        assert np.allclose(rec["gt3d"], ex.gt.gt3d, atol=1e-7)
        assert np.allclose(rec["gt2d"], ex.gt.gt2d, atol=1e-7)


def test_explanations_round_trip(tmp_path):
    values = np.random.default_rng(1).random((36, 36, 1))
    recs = [{"example_id": "m0_c0_000", "model_id": 0, "class_label": 0,
             "method": "saliency", "dims": "2D", "values": values,
             "elapsed_ms": 1.5}]
    io.save_explanations(recs, tmp_path / "expl")
    back = io.load_explanations(tmp_path / "expl")
    assert len(back) == 1
    assert back[0]["method"] == "saliency"
    assert back[0]["dims"] == "2D"
    assert np.allclose(back[0]["values"], values, atol=1e-7)
