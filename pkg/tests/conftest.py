import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from temporal_signed.backbone import BackboneConfig, init_backbone
from temporal_signed.hcim import HcimConfig, init_hcim

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def randomize(params, rng, scale=0.5):
    """Move every parameter (including biases and raw scalars) to a generic random point."""
    for _, t in params.items():
        t.data[...] = t.data + scale * rng.standard_normal(t.data.shape)
    return params


def random_hcim(seed, n=5, d=4, h=None, T=3, heads=1, fusion="global"):
    rng = np.random.default_rng(seed)
    cfg = HcimConfig(embed_dim=d, hidden_dim=h, num_heads=heads, fusion=fusion)
    params = randomize(init_hcim(cfg, rng), rng)
    history = [rng.standard_normal((n, d)) for _ in range(T)]
    z = rng.standard_normal((n, d))
    return cfg, params, history, z


def random_backbone(seed, d=4, layers=1, heads=1):
    rng = np.random.default_rng(seed)
    cfg = BackboneConfig(embed_dim=d, num_layers=layers, num_heads=heads)
    return cfg, randomize(init_backbone(cfg, rng), rng, scale=0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance report

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.skipped):
        return
    number, title = marker.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.skipped:
        status = "SKIP"
        detail = detail or str(rep.longrepr[2] if isinstance(rep.longrepr, tuple) else "")
    else:
        status = "PASS" if rep.passed else "FAIL"
    _ACCEPTANCE[number] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        line = f"criterion {number:>2} {status}: {title}"
        terminalreporter.write_line(f"{line} | {detail}" if detail else line)
