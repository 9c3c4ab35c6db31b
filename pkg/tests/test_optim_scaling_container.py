import numpy as np
import pytest

from gridleak.errors import ContainerError, DivergenceError
from gridleak.nn import autodiff as ad
from gridleak.nn.autodiff import Variable
from gridleak.nn.container import load_tensors, save_tensors
from gridleak.nn.optim import Adam
from gridleak.nn.scaling import ValueScaler, fit_scaler

from _oracles import scalar_adam


class TestAdam:
    def test_zero_grad_zero_decay_is_identity(self):
        p = Variable(np.array([1.0, -2.0, 3.0]))
        opt = Adam({"p": p}, lr=0.1, weight_decay=0.0)
        p.grad = np.zeros(3)
        before = p.data.copy()
        opt.step()
        assert np.array_equal(p.data, before)
        assert opt.step_count == 1

    def test_first_step_magnitude_is_lr_times_sign(self):
        p = Variable(np.array([0.0, 0.0, 0.0]))
        g = np.array([0.5, -1.5, 2.0])
        opt = Adam({"p": p}, lr=0.05)
        p.grad = g.copy()
        opt.step()
        assert np.allclose(p.data, -0.05 * np.sign(g), atol=1e-6)

    def test_matches_scalar_recursion_on_quadratic(self):
        # f(p) = (p - 3)^2, lr = 0.1, 100 steps
        traj_oracle = scalar_adam(lambda p: 2.0 * (p - 3.0), p0=0.0, lr=0.1, steps=100)
        p = Variable(np.array([0.0]))
        opt = Adam({"p": p}, lr=0.1)
        mine = []
        for _ in range(100):
            p.grad = np.array([2.0 * (p.data[0] - 3.0)])
            opt.step()
            mine.append(p.data[0])
        assert np.allclose(mine, traj_oracle, atol=1e-12)
        assert abs(p.data[0] - 3.0) < 0.1

    def test_nan_gradient_aborts(self):
        p = Variable(np.array([1.0]))
        opt = Adam({"p": p}, lr=0.1)
        p.grad = np.array([np.nan])
        with pytest.raises(DivergenceError):
            opt.step()

    def test_decoupled_decay_applies_without_gradient_signal(self):
        p = Variable(np.array([2.0]))
        opt = Adam({"p": p}, lr=0.1, weight_decay=0.5)
        p.grad = np.zeros(1)
        opt.step()
        # pure decay: p - lr*wd*p
        assert np.allclose(p.data, 2.0 - 0.1 * 0.5 * 2.0)


class TestValueScaler:
    def test_minmax_midpoint(self):
        s = fit_scaler("minmax", np.array([0.0, 10.0]))
        assert s.transform(np.array([5.0]))[0] == pytest.approx(0.5)
        assert s.transform(np.array([0.0]))[0] == 0.0
        assert s.transform(np.array([10.0]))[0] == 1.0

    def test_standard_two_points(self):
        s = fit_scaler("standard", np.array([-1.0, 1.0]))
        assert s.transform(np.array([1.0]))[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("kind", ["minmax", "standard"])
    def test_roundtrip_identity(self, kind):
        rng = np.random.default_rng(8)
        data = rng.normal(3.0, 2.5, size=500)
        s = fit_scaler(kind, data)
        back = s.inverse_transform(s.transform(data))
        assert np.max(np.abs(back - data)) < 1e-12

    @pytest.mark.parametrize("kind", ["minmax", "standard"])
    def test_columnwise_roundtrip(self, kind):
        rng = np.random.default_rng(9)
        data = rng.normal(size=(40, 6)) * np.array([1, 10, 100, 0.1, 5, 2.0])
        s = fit_scaler(kind, data)
        back = s.inverse_transform(s.transform(data))
        assert np.max(np.abs(back - data)) < 1e-12

    def test_degenerate_feature_uses_unit_divisor(self):
        s = fit_scaler("minmax", np.full(10, 7.0))
        assert s.scale_[0] == 1.0
        assert s.transform(np.array([7.0]))[0] == 0.0
        assert s.transform(np.array([8.0]))[0] == 1.0
        s2 = fit_scaler("standard", np.full(10, 7.0))
        assert s2.scale_[0] == 1.0
        assert s2.transform(np.array([7.0]))[0] == 0.0

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            fit_scaler("robust", np.arange(4.0))

    def test_tensor_roundtrip(self):
        s = fit_scaler("standard", np.random.default_rng(1).normal(size=100))
        s2 = ValueScaler.from_tensors(s.to_tensors())
        assert s2.kind == "standard"
        x = np.linspace(-3, 3, 7)
        assert np.array_equal(s.transform(x), s2.transform(x))

    def test_sklearn_get_params(self):
        s = ValueScaler(kind="standard")
        assert s.get_params() == {"kind": "standard"}
        s.set_params(kind="minmax")
        assert s.kind == "minmax"


class TestContainer:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        tensors = {
            "lstm/wx": rng.normal(size=(1, 64)),
            "lstm/wh": rng.normal(size=(16, 64)),
            "lstm/b": rng.normal(size=64),
            "scalar": np.array(3.25),
        }
        path = tmp_path / "model.sglk"
        save_tensors(path, tensors)
        loaded = load_tensors(path)
        assert list(loaded) == list(tensors)
        for k in tensors:
            assert np.asarray(tensors[k]).tobytes() == loaded[k].tobytes()
            assert np.asarray(tensors[k]).shape == loaded[k].shape

    def test_magic_bytes(self, tmp_path):
        path = tmp_path / "m.sglk"
        save_tensors(path, {"t": np.zeros(2)})
        assert path.read_bytes()[:4] == b"SGLK"

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.sglk"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ContainerError):
            load_tensors(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "m.sglk"
        save_tensors(path, {"t": np.arange(10.0)})
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ContainerError):
            load_tensors(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "m.sglk"
        save_tensors(path, {"t": np.arange(4.0)})
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(ContainerError):
            load_tensors(path)


def test_training_loop_is_deterministic():
    def train_once():
        rng = np.random.default_rng(77)
        w = Variable(rng.uniform(-0.5, 0.5, (3, 1)))
        b = Variable(np.zeros(1))
        x = rng.normal(size=(32, 3))
        y = x @ np.array([[1.0], [-2.0], [0.5]]) + 0.3
        opt = Adam({"w": w, "b": b}, lr=0.05)
        for _ in range(50):
            opt.zero_grad()
            pred = ad.add(ad.matmul(x, w), b)
            loss = ad.vmean(ad.square(ad.add(pred, -y)))
            loss.backward()
            opt.step()
        return w.data.copy(), b.data.copy()

    w1, b1 = train_once()
    w2, b2 = train_once()
    assert w1.tobytes() == w2.tobytes()
    assert b1.tobytes() == b2.tobytes()
