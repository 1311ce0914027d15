import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from reuse_evo.core import (
    ConfigError,
    LatentPoint,
    SearchConfig,
    default_config,
    derive_seed,
    lex_compare,
    lex_key,
    stream,
    top_b,
)


def test_default_config_population_sizes():
    cfg = default_config()
    assert (cfg.B, cfg.B_par, cfg.T) == (4, 3, 3)


def test_default_config_stage_budgets():
    assert default_config().stage_budgets == (40, 20)


def test_default_config_tau_from_max_similarity():
    # oracle: published rho_max = 0.85
    assert default_config().tau == pytest.approx(1 - 0.85, abs=1e-12)


def test_default_config_published_values():
    cfg = default_config()
    assert cfg.d_z == 10 and cfg.B_off == 4 and cfg.M_eval == 2 and cfg.n_imm == 1
    assert cfg.alpha_cross == 0.35 and cfg.sigma_mut == 0.42 and cfg.gamma_mut == 0.82
    assert cfg.N == 10 and cfg.qed_floor == 0.5 and cfg.sa_floor == 0.5
    assert cfg.beta_chem_search == 0.40 and cfg.beta_chem_rerank == 0.60
    assert cfg.beta_div_subset == 0.05 and cfg.beta_bal_subset == 0.02
    assert cfg.lambda_bal_proxy == 0.25
    assert cfg.S == 2


def test_default_mixture_weights():
    cfg = default_config()
    assert cfg.alpha_imm == pytest.approx(0.25)
    assert cfg.alpha_mut == pytest.approx(0.40)
    assert cfg.alpha_mut + cfg.alpha_cross + cfg.alpha_imm == pytest.approx(1.0, abs=1e-12)


def test_default_panel_weights():
    cfg = default_config()
    assert (cfg.eta_aff, cfg.eta_chem, cfg.eta_div) == (1.0, cfg.beta_chem_rerank, cfg.beta_div_subset)


@pytest.mark.parametrize(
    "overrides",
    [
        dict(alpha_mut=0.5),
        dict(B_par=5),
        dict(N=1),
        dict(tau=1.5),
        dict(sigma_mut=-0.1),
        dict(gamma_mut=0.0),
        dict(stage_budgets=(40, 0)),
        dict(seed=-1),
        dict(seed=2**64),
    ],
)
def test_invalid_configs_rejected(overrides):
    with pytest.raises(ConfigError):
        default_config(**overrides)


def test_funnel_must_match_budgets():
    with pytest.raises(ConfigError):
        default_config(stage_budgets=(40,))


def test_lex_feasible_beats_infeasible():
    assert lex_compare((True, -5.0), (False, 10.0)) == -1


def test_lex_larger_score_wins():
    assert lex_compare((True, 3.0), (True, 7.0)) == 1


def test_lex_tie_broken_by_id():
    assert lex_compare((False, 1.0, 2), (False, 1.0, 9)) == -1


def test_lex_nan_is_minus_infinity():
    assert lex_key(True, math.nan, 0) == lex_key(True, -math.inf, 0)
    assert lex_compare((True, None, 0), (True, -1e300, 1)) == 1


entries = st.tuples(st.booleans(), st.floats(allow_nan=False, width=32), st.integers(0, 50))


@given(entries, entries)
def test_lex_antisymmetric(a, b):
    assert lex_compare(a, b) == -lex_compare(b, a)


@given(entries, entries, entries)
def test_lex_transitive(a, b, c):
    if lex_compare(a, b) <= 0 and lex_compare(b, c) <= 0:
        assert lex_compare(a, c) <= 0


@given(st.lists(entries, max_size=30))
def test_lex_total_on_sets(items):
    # sorting with keys never sees incomparable pairs
    ordered = sorted(items, key=lambda e: lex_key(*e))
    for x, y in zip(ordered, ordered[1:]):
        assert lex_compare(x, y) <= 0


def test_top_b_takes_prefix():
    items = ["a", "b", "c", "d"]
    keys = [lex_key(False, 9, 0), lex_key(True, 1, 1), lex_key(True, 2, 2), lex_key(True, 2, 3)]
    assert top_b(items, keys, 2) == ["c", "d"]


def test_streams_are_keyed_and_reproducible():
    a = stream(3, "x", 1).random(4)
    assert (a == stream(3, "x", 1).random(4)).all()
    assert not (a == stream(3, "x", 2).random(4)).all()
    assert not (a == stream(3, "y", 1).random(4)).all()
    assert derive_seed(3, "x", 1) == derive_seed(3, "x", 1) != derive_seed(4, "x", 1)


def test_latent_point_validation():
    z = LatentPoint([0.0, 1.0], 3)
    assert z.dim == 2
    with pytest.raises(ValueError):
        z.coords[0] = 5.0
    with pytest.raises(ConfigError):
        LatentPoint([math.inf], 0)
    with pytest.raises(ConfigError):
        LatentPoint([0.0], 0, birth_iteration=-1)


def test_search_config_is_frozen():
    with pytest.raises(Exception):
        SearchConfig().B = 9
