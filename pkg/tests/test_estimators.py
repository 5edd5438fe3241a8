import numpy as np
import pytest
from sklearn.base import clone

from dppmb.estimators import KDPPSelector, MaxMinPicker, check_fingerprints


@pytest.fixture
def fps(rng):
    return (rng.random((12, 40)) < 0.3).astype(int)


def test_params_and_clone():
    sel = KDPPSelector(k=3, kernel="dice", random_state=4)
    assert sel.get_params() == {"k": 3, "kernel": "dice", "ridge": 1e-8, "random_state": 4}
    assert clone(sel).get_params() == sel.get_params()
    assert MaxMinPicker(threshold=0.5).set_params(threshold=0.6).threshold == 0.6


def test_kdpp_selector_fit_transform(fps):
    sel = KDPPSelector(k=4, random_state=0).fit(fps)
    assert sel.support_.shape == (4,) and len(set(sel.support_)) == 4
    np.testing.assert_array_equal(sel.transform(fps), fps[sel.support_])
    again = KDPPSelector(k=4, random_state=0).fit(fps)
    np.testing.assert_array_equal(again.support_, sel.support_)
    draws = sel.sample(6)
    assert draws.shape == (6, 4)


def test_kdpp_precomputed_and_dice(rng):
    sel = KDPPSelector(k=2, kernel="precomputed", random_state=1).fit(np.diag([1.0, 2.0, 3.0, 4.0]))
    assert sel.support_.shape == (2,)
    counts = rng.integers(0, 4, size=(6, 10))
    assert KDPPSelector(k=3, kernel="dice", random_state=2).fit(counts).support_.size == 3


@pytest.mark.parametrize("kw,x", [
    (dict(k=20), "fps"), (dict(kernel="cosine"), "fps"), (dict(k=2, kernel="precomputed"), "rect"),
    (dict(k=2), "nonbinary"), (dict(k=2, kernel="dice"), "negative"),
])
def test_kdpp_validation(fps, kw, x):
    data = {"fps": fps, "rect": np.ones((3, 4)), "nonbinary": np.full((3, 4), 2),
            "negative": -np.ones((3, 4))}[x]
    with pytest.raises(ValueError):
        KDPPSelector(**kw).fit(data)


def test_transform_requires_fit(fps):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        KDPPSelector().transform(fps)
    with pytest.raises(NotFittedError):
        MaxMinPicker().transform(fps)


def test_maxmin_picker(fps):
    pick = MaxMinPicker(threshold=0.7, random_state=3).fit(fps)
    assert pick.n_selected_ == len(pick.support_) >= 1
    np.testing.assert_array_equal(pick.fit_transform(fps), fps[pick.support_])
    with pytest.raises(ValueError):
        pick.transform(fps[:3])


def test_check_fingerprints():
    assert check_fingerprints([[0, 1], [1, 1]]).dtype == bool
    with pytest.raises(ValueError):
        check_fingerprints([[0, 3]])
