import numpy as np
import pytest
from scipy.ndimage import gaussian_filter


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """One visible pass/fail line per acceptance criterion."""
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.module.__name__.endswith("test_acceptance"):
        label = item.name.replace("test_", "", 1)
        status = "PASS" if rep.passed else "FAIL"
        line = f"ACCEPTANCE {status}  {label}"
        rep.sections.append(("acceptance", line))
        print(f"\n{line}", flush=True)


def smooth_texture(h, w, seed=0, channels=None, sigma=1.5, amp=0.22):
    """Band-limited random texture in [0.02, 0.98], good for warping tests."""
    r = np.random.default_rng(seed)
    shape = (h, w) if channels is None else (h, w, channels)
    axes = (0, 1)
    img = gaussian_filter(r.random(shape), sigma=sigma, axes=axes)
    img = 0.5 + amp * (img - img.mean(axes, keepdims=True)) / img.std(axes, keepdims=True)
    return np.clip(img, 0.02, 0.98)
