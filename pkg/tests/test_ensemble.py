import numpy as np
import pytest

from mimo_noma.coding.ensemble import (MAC_IRA, SU_IRA, BUILTIN_PROFILES, CodeEnsemble, Profile, ProfileError,
                                       dumps_profile, load_profile, loads_profile)


@pytest.mark.parametrize("beta", sorted(BUILTIN_PROFILES))
def test_builtin_profiles_have_rate_one_tenth(beta):
    p = BUILTIN_PROFILES[beta]
    assert p.beta == beta
    # the published fractions are rounded; design rates land within 2% of 0.1
    assert p.ensemble.design_rate == pytest.approx(0.1, rel=2e-2)


def test_baselines():
    assert MAC_IRA.design_rate == pytest.approx(0.08, rel=2e-2)
    assert SU_IRA.design_rate == pytest.approx(0.1, rel=1e-2)


def test_node_and_edge_fractions():
    e = CodeEnsemble(lam={2: 0.5, 4: 0.5})
    assert np.allclose(e.node_fractions, [2 / 3, 1 / 3])
    assert e.mean_degree == pytest.approx(8 / 3)
    assert e.with_length(100).n == 100


@pytest.mark.parametrize("lam,kw", [({}, {}), ({3: 0.5}, {}), ({0: 1.0}, {}), ({3: 1.0}, dict(q=0)),
                                    ({3: 1.0}, dict(rate_u=1.5)), ({3: -0.1, 4: 1.1}, {})])
def test_invalid_ensembles(lam, kw):
    with pytest.raises(ProfileError):
        CodeEnsemble(lam=lam, **kw)


def test_sum_tolerance_boundary():
    CodeEnsemble(lam={3: 0.5, 4: 0.5000009})
    with pytest.raises(ProfileError):
        CodeEnsemble(lam={3: 0.5, 4: 0.500002})


@pytest.mark.parametrize("beta", sorted(BUILTIN_PROFILES))
def test_text_round_trip(beta):
    p = BUILTIN_PROFILES[beta]
    back = loads_profile(dumps_profile(p))
    assert back == p


def test_shipped_config_files_match_builtins():
    from pathlib import Path

    cfg = Path(__file__).resolve().parents[1] / "configs"
    assert load_profile(cfg / "profile_beta0p5.cfg") == BUILTIN_PROFILES[0.5]
    assert load_profile(cfg / "profile_beta3.cfg") == BUILTIN_PROFILES[3.0]
    assert load_profile(cfg / "mac_ira.cfg").ensemble == MAC_IRA


@pytest.mark.parametrize("text,msg", [
    ("n_u = 2\nn_r = 2\n", "lambda"),
    ("n_u = 2\nlambda = 3 1.0\n", "n_r"),
    ("n_u = 2\nn_r = 2\nlambda = 3 1.0\nfoo = 1\n", ":4:"),
    ("n_u = x\n", ":1:"),
    ("n_u = 2\nn_r = 2\nlambda = 3 0.5\nlambda = 3 0.5\n", "twice"),
    ("n_u = 2\nn_r = 2\nlambda = 3 1.0\nbeta = 3\n", "beta"),
    ("n_u 2\n", "key = value"),
])
def test_profile_parse_errors(text, msg):
    with pytest.raises(ProfileError, match=msg):
        loads_profile(text)


def test_profile_defaults():
    p = loads_profile("# minimal\nn_u = 4\nn_r = 2\nlambda = 3 1.0\n")
    assert isinstance(p, Profile) and p.ensemble.q == 1 and p.ensemble.alpha == 2 and p.threshold_db is None
