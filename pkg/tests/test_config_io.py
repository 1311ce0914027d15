import pytest
from hypothesis import given
from hypothesis import strategies as st

from reuse_evo.config_io import (
    OutputSpec,
    RunConfigDocument,
    document_from_dict,
    dump_document,
    load_document,
)
from reuse_evo.core import ConfigError, EvaluatorStage, default_config
from reuse_evo.generator import default_task


def test_empty_document_is_defaults():
    doc = load_document("")
    assert doc.search == default_config()
    assert doc.task == default_task()
    assert doc.output == OutputSpec()


def test_partial_sections_fall_back():
    doc = load_document("search:\n  T: 5\ntask:\n  w_a: 2.0\n")
    assert doc.search == default_config(T=5)
    assert doc.task.w_a == 2.0 and doc.task.landscape_a == default_task().landscape_a


@pytest.mark.parametrize(
    "text,key",
    [
        ("search:\n  Bee: 3\n", "search.Bee"),
        ("task:\n  nope: 1\n", "task.nope"),
        ("task:\n  prior:\n    width: 1\n", "task.prior.width"),
        ("task:\n  landscape_a:\n    radius: 1\n", "task.landscape_a.radius"),
        ("output:\n  path: x\n", "output.path"),
        ("extra: {}\n", "document.extra"),
        ("funnel:\n  - {noise_sigma: 0.1, cost_units: 1, speed: 2}\n", "funnel[1].speed"),
    ],
)
def test_unknown_keys_named(text, key):
    with pytest.raises(ConfigError, match=key.replace("[", r"\[").replace("]", r"\]")):
        load_document(text)


def test_malformed_yaml():
    with pytest.raises(ConfigError):
        load_document("search: [1, 2\n")


def test_invalid_values():
    with pytest.raises(ConfigError):
        load_document("search:\n  alpha_mut: 0.9\n")
    with pytest.raises(ConfigError):
        load_document("output:\n  formats: [trace, pdf]\n")


def test_funnel_section():
    doc = load_document(
        "search:\n  stage_budgets: [30, 10, 5]\nfunnel:\n"
        "  - {noise_sigma: 1.0, cost_units: 1}\n  - {noise_sigma: 0.3, cost_units: 3}\n  - {noise_sigma: 0, cost_units: 9}\n"
    )
    assert doc.search.S == 3 and doc.search.funnel[2] == EvaluatorStage(3, 0.0, 9.0)


def test_roundtrip_default():
    doc = RunConfigDocument()
    assert load_document(dump_document(doc)) == doc


@given(
    st.integers(2, 6),
    st.integers(0, 5),
    st.floats(0.0, 0.6),
    st.floats(0.0, 0.3),
    st.integers(2, 8),
    st.integers(0, 2**64 - 1),
    st.floats(0.1, 5.0),
    st.sampled_from(["gaussian", "anchor_mixture"]),
)
def test_roundtrip_random(B, T, cross, imm, N, seed, scale, mode):
    cfg = default_config(
        B=B, B_par=min(3, B), T=T, alpha_cross=cross, alpha_imm=imm, alpha_mut=1 - cross - imm, N=N, seed=seed
    )
    from dataclasses import replace

    task = default_task()
    task = replace(task, landscape_a=replace(task.landscape_a, scale=scale), prior=replace(task.prior, mode=mode))
    doc = RunConfigDocument(search=cfg, task=task, output=OutputSpec("out", ("trace",)))
    assert load_document(dump_document(doc)) == doc


def test_dimension_mismatch():
    with pytest.raises(ConfigError):
        document_from_dict({"search": {"d_z": 4}, "task": {"landscape_a": {"center": [0, 0]}}})
