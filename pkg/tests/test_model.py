import numpy as np
import numpy.testing as npt
import pytest

from conftest import tiny_config
from mmsum import checkpoint
from mmsum.errors import CheckpointError
from mmsum.model import SummarizerModel, build_parameters
from mmsum.training import make_check_sample


def test_parameter_allocation_matches_configuration():
    rng = np.random.default_rng(0)
    full = build_parameters(tiny_config(), 7, rng)
    assert "encoders/transcript/fw_W" in full
    assert "attention/tr_over_frames/W_q" in full
    assert "fusion/frame/F/W1" in full

    no_tr = build_parameters(tiny_config(use_transcript=False), 7, rng)
    assert "encoders/transcript/fw_W" not in no_tr
    assert "attention/sent_query/W_q" in no_tr  # fallback single-hop set remains

    text_only = build_parameters(tiny_config(use_frames=False), 7, rng)
    assert set(text_only) == {
        "encoders/embedding",
        "encoders/word/fw_W", "encoders/word/fw_b",
        "encoders/word/bw_W", "encoders/word/bw_b",
        "encoders/sentence/fw_W", "encoders/sentence/fw_b",
        "encoders/sentence/bw_W", "encoders/sentence/bw_b",
        "fusion/text/f/W1", "fusion/text/f/b1",
        "fusion/text/f/w2", "fusion/text/f/b2",
    }

    early = build_parameters(tiny_config(fusion="early", attention="concat_product"),
                             7, rng)
    assert "attention/sent_query/b_joint" in early
    assert "fusion/text/joint/W1" in early
    assert "fusion/text/f/W1" not in early


def test_same_seed_same_initialization():
    cfg = tiny_config()
    a = build_parameters(cfg, 7, np.random.default_rng(5))
    b = build_parameters(cfg, 7, np.random.default_rng(5))
    assert set(a) == set(b)
    for name in a:
        npt.assert_array_equal(a[name], b[name])


def test_model_rejects_mismatched_parameters():
    cfg = tiny_config()
    params = build_parameters(cfg, 7, np.random.default_rng(0))
    with pytest.raises(CheckpointError):
        SummarizerModel(params, tiny_config(hidden=3), 7)
    params.pop("encoders/embedding")
    with pytest.raises(CheckpointError, match="missing"):
        SummarizerModel(params, cfg, 7)


@pytest.mark.parametrize("attention", ["none", "concat_product", "bilinear", "bihop"])
@pytest.mark.parametrize("fusion_mode", ["early", "tensor", "late", "late_plus"])
def test_forward_shapes_all_configs(attention, fusion_mode):
    cfg = tiny_config(attention=attention, fusion=fusion_mode)
    rng = np.random.default_rng(1)
    sample = make_check_sample(cfg, rng)
    model = SummarizerModel(build_parameters(cfg, 7, rng), cfg, 7)
    out = model.forward(sample)
    ns = len(sample.document.sentences)
    nm = sample.video.frames.shape[0]
    assert out.sent_probs.shape == (ns,)
    assert out.frame_probs.shape == (nm,)
    assert np.all((out.sent_probs.data > 0) & (out.sent_probs.data < 1))
    assert out.sent_attn.weights.data.shape[0] == ns
    npt.assert_allclose(out.sent_attn.weights.data.sum(axis=1), np.ones(ns),
                        atol=1e-6)
    npt.assert_allclose(out.frame_attn.weights.data.sum(axis=1), np.ones(nm),
                        atol=1e-6)


def test_bihop_model_with_empty_transcript_falls_back():
    import dataclasses
    cfg = tiny_config(attention="bihop")
    rng = np.random.default_rng(6)
    sample = make_check_sample(cfg, rng)
    sample = dataclasses.replace(
        sample, transcript=dataclasses.replace(sample.transcript,
                                               tokens=np.array([], dtype=int)))
    model = SummarizerModel(build_parameters(cfg, 7, rng), cfg, 7)
    out = model.forward(sample)  # single-hop fallback, no error
    nm = sample.video.frames.shape[0]
    assert out.sent_attn.weights.data.shape == (2, nm)  # attends frames directly


def test_text_only_forward_has_no_frame_outputs():
    cfg = tiny_config(use_frames=False)
    rng = np.random.default_rng(2)
    sample = make_check_sample(cfg, rng)
    model = SummarizerModel(build_parameters(cfg, 7, rng), cfg, 7)
    out = model.forward(sample)
    assert out.frame_probs is None and out.frame_states is None


def test_late_modes_expose_unimodal_decisions():
    cfg = tiny_config(fusion="late_plus")
    rng = np.random.default_rng(3)
    sample = make_check_sample(cfg, rng)
    model = SummarizerModel(build_parameters(cfg, 7, rng), cfg, 7)
    out = model.forward(sample)
    f_vals, g_vals = out.sent_unimodal
    assert f_vals.shape == out.sent_probs.shape
    assert np.all((g_vals.data > 0) & (g_vals.data < 1))


def test_checkpoint_round_trip(tmp_path):
    cfg = tiny_config()
    params = build_parameters(cfg, 7, np.random.default_rng(4))
    vocab = {"<unk>": 0, "a": 1, "b": 2, "c": 3, "d": 4, "e": 5, "f": 6}
    checkpoint.save_checkpoint(tmp_path / "ck", params, cfg, vocab)
    loaded, cfg2, vocab2 = checkpoint.load_checkpoint(tmp_path / "ck")
    assert cfg2 == cfg and vocab2 == vocab
    for name, arr in params.items():
        npt.assert_array_equal(loaded[name],
                               arr.astype(np.float32).astype(np.float64),
                               err_msg=name)
    # loaded parameters drive a working model
    model = SummarizerModel(loaded, cfg2, len(vocab2))
    sample = make_check_sample(cfg2, np.random.default_rng(0))
    assert model.forward(sample).sent_probs.shape == (2,)
