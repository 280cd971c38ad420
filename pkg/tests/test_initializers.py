import numpy as np
import pytest

from steinit.activations import Activation
from steinit.exceptions import (
    DegeneratePropagationError,
    DegenerateSignalError,
    NoDirectionError,
    WidthExceedsRankError,
)
from steinit.initializers import (
    TRUNC_STD,
    InitScheme,
    first_order_index,
    glorot_normal,
    he_normal,
    init_network,
    orthogonal_init,
    scaling_factor,
    score2_cross_moment,
    stein_glm_init,
    stein_layer_init,
    truncated_normal,
)
from steinit.mlp import forward, task_loss
from steinit.network import Architecture
from steinit.synthetic import multi_index, principal_angles


def angle_deg(u, v):
    c = abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return np.degrees(np.arccos(min(1.0, c)))


def loop_cross_moment(H, y):
    n, m = H.shape
    S = np.zeros((m, m))
    for i in range(n):
        S += y[i] * (np.outer(H[i], H[i]) - np.eye(m))
    return S / n


def test_cross_moment_matches_loop(rng):
    H = rng.standard_normal((40, 5))
    y = rng.standard_normal(40)
    np.testing.assert_allclose(score2_cross_moment(H, y), loop_cross_moment(H, y), atol=1e-12)


def test_cross_moment_trivial_cases():
    np.testing.assert_array_equal(score2_cross_moment(np.ones((4, 3)), np.zeros(4)),
                                  np.zeros((3, 3)))
    np.testing.assert_array_equal(score2_cross_moment(np.zeros((1, 4)), [1.0]), -np.eye(4))


def test_cross_moment_errors():
    with pytest.raises(ValueError):
        score2_cross_moment(np.zeros((0, 3)), np.zeros(0))
    with pytest.raises(ValueError):
        score2_cross_moment(np.zeros((4, 3)), np.zeros(5))


def test_cross_moment_monte_carlo_single_index():
    r = np.random.default_rng(1)
    beta = r.standard_normal(6)
    beta /= np.linalg.norm(beta)
    X = r.standard_normal((200_000, 6))
    y = (X @ beta) ** 2
    S = score2_cross_moment(X, y)
    # E[y (xx' - I)] = E[g''] bb' = 2 bb'
    assert np.abs(S - 2 * np.outer(beta, beta)).max() < 0.1
    evals = np.linalg.eigvalsh(S)
    assert abs(evals[-1] - 2) < 0.1
    assert np.abs(evals[:-1]).max() < 0.1


def test_layer_zero_mean_gives_zero_bias(rng):
    H = rng.standard_normal((30, 4))
    H -= H.mean(axis=0)
    y = rng.standard_normal(30)
    _, b = stein_layer_init(H, y, 3)
    assert np.abs(b).max() < 1e-14


def test_full_width_is_orthogonal(rng):
    H = rng.standard_normal((100, 5))
    W, _ = stein_layer_init(H, rng.standard_normal(100), 5, alpha=1.0)
    np.testing.assert_allclose(W.T @ W, np.eye(5), atol=1e-10)
    np.testing.assert_allclose(W @ W.T, np.eye(5), atol=1e-10)


def test_layer_scaling_and_centering(rng):
    H = rng.standard_normal((200, 8)) + 3
    W, b = stein_layer_init(H, rng.random(200), 4, alpha=4.0)
    assert np.abs(W.T @ W - 16 * np.eye(4)).max() < 1e-8
    assert np.abs((H @ W + b).mean(axis=0)).max() < 1e-10


def test_layer_errors(rng):
    H = rng.standard_normal((10, 3))
    with pytest.raises(WidthExceedsRankError):
        stein_layer_init(H, np.ones(10), 4)
    with pytest.raises(DegenerateSignalError):
        stein_layer_init(H, np.zeros(10), 2)
    with pytest.raises(ValueError):
        stein_layer_init(H, np.ones(10), 2, alpha=0.0)


def test_fill_mode_appends_unit_columns(rng):
    H = rng.standard_normal((50, 3))
    W, b = stein_layer_init(H, rng.standard_normal(50), 7, alpha=2.0, fill=True,
                            rng=np.random.default_rng(0))
    assert W.shape == (3, 7)
    np.testing.assert_allclose(np.linalg.norm(W, axis=0), 2.0)
    np.testing.assert_allclose(W[:, :3].T @ W[:, :3], 4 * np.eye(3), atol=1e-10)
    assert np.abs((H @ W + b).mean(axis=0)).max() < 1e-10


def test_multi_index_recovery():
    X, y, B = multi_index(100_000, 10, 3, seed=0, coefs=(3, 2, 1))
    W, _ = stein_layer_init(X, y, 3)
    assert np.degrees(principal_angles(W, B).max()) < 5


def test_scaling_factor():
    assert scaling_factor("tanh") == 1.0
    assert scaling_factor("sigmoid") == 4.0
    half = Activation("half", lambda a: 0.5 * a, lambda h: 0.5 * np.ones_like(h), 0.5)
    assert scaling_factor(half) == 2.0
    with pytest.raises(ValueError):
        scaling_factor("relu")
    with pytest.raises(ValueError):
        scaling_factor("identity")


def test_first_order_coordinate():
    r = np.random.default_rng(2)
    X = r.standard_normal((100_000, 5))
    v = first_order_index(X, X[:, 0])
    assert angle_deg(v, np.eye(5)[0]) < 2


def test_first_order_linear_index():
    r = np.random.default_rng(3)
    beta = r.standard_normal(8)
    beta /= np.linalg.norm(beta)
    X = r.standard_normal((100_000, 8))
    v = first_order_index(X, 3 * X @ beta)
    assert angle_deg(v, beta) < 2
    assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_first_order_no_direction():
    with pytest.raises(NoDirectionError):
        first_order_index(np.ones((10, 3)), np.zeros(10))


@pytest.mark.parametrize("fn", [glorot_normal, he_normal])
def test_random_init_deterministic(fn):
    a = fn(30, 20, np.random.default_rng(4))
    b = fn(30, 20, np.random.default_rng(4))
    np.testing.assert_array_equal(a, b)


def test_glorot_variance_and_bound():
    W = glorot_normal(100, 100, np.random.default_rng(5))
    target = 2 / 200
    assert abs(W.var() / target - 1) < 0.15
    # before rescaling every draw sits inside two standard deviations
    assert np.abs(W * TRUNC_STD).max() <= 2 * np.sqrt(target) + 1e-15


def test_he_variance_and_mean():
    W = he_normal(100, 100, np.random.default_rng(6))
    assert abs(W.var() / 0.02 - 1) < 0.15
    assert abs(W.mean()) < 5 * np.sqrt(0.02 / W.size)


def test_truncated_normal_constant():
    z = truncated_normal(400_000, 1.0, np.random.default_rng(0))
    assert abs(z.std() - 1) < 5e-3
    assert np.abs(z).max() <= 2 / TRUNC_STD


def test_orthogonal_init():
    Q = orthogonal_init(40, 10, np.random.default_rng(7))
    assert np.abs(Q.T @ Q - np.eye(10)).max() < 1e-10
    np.testing.assert_array_equal(Q, orthogonal_init(40, 10, np.random.default_rng(7)))
    S = orthogonal_init(9, 9, np.random.default_rng(8))
    assert abs(abs(np.linalg.det(S)) - 1) < 1e-10
    with pytest.raises(ValueError):
        orthogonal_init(3, 4, np.random.default_rng(0))


def test_scheme_parse_and_labels():
    assert InitScheme.parse("SteinGLM") == InitScheme("stein", "glm")
    assert InitScheme.parse("Stein") == InitScheme("stein", "same-as-hidden")
    assert InitScheme.parse("HeNormal+GLM") == InitScheme("he-normal", "glm")
    assert InitScheme.parse("orthogonal").label == "Orthogonal"
    assert InitScheme("glorot-normal", "glm").label == "GlorotNormal+GLM"
    with pytest.raises(ValueError):
        InitScheme.parse("xavier-uniform")
    with pytest.raises(ValueError):
        InitScheme(lambda_grid=(0.0, 1.0))


def planted(n=600, d=6, seed=0):
    X, y, _ = multi_index(n, d, 2, seed=seed)
    return X, (y - y.min()) / (y.max() - y.min())


def test_single_layer_composition():
    X, y = planted()
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    arch = Architecture.for_task(6, 1, 6, "regression")
    params = stein_glm_init(X, y, arch)
    W1, b1 = params.hidden[0]
    np.testing.assert_allclose(W1.T @ W1, np.eye(6), atol=1e-10)
    assert np.abs((X @ W1 + b1).mean(axis=0)).max() < 1e-10


@pytest.mark.parametrize("activation,alpha", [("tanh", 1.0), ("sigmoid", 4.0)])
def test_deep_invariants(activation, alpha):
    X, y = planted()
    arch = Architecture.for_task(6, 5, 4, "regression", activation)
    params = init_network(arch, InitScheme("stein", "glm"), X, y)
    fwd = forward(params, X, arch)
    for (W, _), a in zip(params.hidden, fwd.pre):
        assert np.abs(W.T @ W - alpha**2 * np.eye(W.shape[1])).max() < 1e-8
        assert np.abs(a.mean(axis=0)).max() < 1e-10


def test_glm_output_on_random_features():
    X, y = planted()
    arch = Architecture.for_task(6, 3, 5, "regression")
    params = init_network(arch, InitScheme("glorot-normal", "glm"), X, y,
                          rng=np.random.default_rng(1))
    h = forward(params, X, arch).post[-1]
    hc = h - h.mean(axis=0)
    lam = params.meta["glm_lambda"]
    w = params.W_out[:, 0]
    resid = (hc.T @ hc / len(y) + lam * np.eye(5)) @ w - hc.T @ (y - y.mean()) / len(y)
    assert np.abs(resid).max() < 1e-10
    assert params.meta["scheme"] == "GlorotNormal+GLM"


def test_random_hidden_biases_zero():
    X, y = planted()
    arch = Architecture.for_task(6, 3, 5, "regression")
    params = init_network(arch, InitScheme("he-normal", "same-as-hidden"), X, y,
                          rng=np.random.default_rng(2))
    assert all(np.all(b == 0) for b in params.biases)


def test_stein_without_glm_output_layer():
    X, y = planted()
    arch = Architecture.for_task(6, 2, 4, "regression")
    params = init_network(arch, InitScheme("stein", "same-as-hidden"), X, y)
    h = forward(params, X, arch).post[-1]
    np.testing.assert_allclose(np.linalg.norm(params.W_out), 1.0)
    assert abs((h @ params.W_out + params.b_out).mean()) < 1e-10
    assert "glm_lambda" not in params.meta


def test_collapse_names_layer():
    X = np.random.default_rng(0).standard_normal((50, 3))
    y = X[:, 0] ** 2
    arch = Architecture.for_task(3, 2, 2, "regression")
    with pytest.raises(DegeneratePropagationError) as info:
        init_network(arch, InitScheme("stein", "glm", alpha=1e-12), X, y)
    assert info.value.layer == 1


def test_restandardize_variant_centers():
    X, y = planted()
    arch = Architecture.for_task(6, 3, 4, "regression")
    params = init_network(arch, InitScheme("stein", "glm", restandardize=True), X, y)
    for a in forward(params, X, arch).pre:
        assert np.abs(a.mean(axis=0)).max() < 1e-10


def test_first_epoch_loss_below_glorot():
    """Head to head on a planted two-layer model, same data and seed."""
    from steinit.mlp import TrainConfig, train

    stein, glorot = [], []
    for seed in range(5):
        r = np.random.default_rng(seed)
        X = r.standard_normal((1000, 8))
        V = np.linalg.qr(r.standard_normal((8, 3)))[0]
        y = np.tanh(X @ V) @ np.array([1.0, -0.5, 0.8]) + 0.3 * (X @ V[:, 0]) ** 2
        y = (y - y.min()) / (y.max() - y.min())
        Xv, yv = X[800:], y[800:]
        X, y = X[:800], y[:800]
        arch = Architecture.for_task(8, 4, 8, "regression")
        for scheme, out in ((InitScheme("stein", "glm"), stein),
                            (InitScheme("glorot-normal", "same-as-hidden"), glorot)):
            p = init_network(arch, scheme, X, y, Xv, yv, rng=np.random.default_rng(seed))
            m = train(p, X, y, Xv, yv, arch, TrainConfig(max_epochs=1, seed=seed), "regression")
            out.append(m.trajectory[0].train_loss)
    assert np.mean(stein) < np.mean(glorot)


def test_initial_loss_reported_consistently():
    X, y = planted()
    arch = Architecture.for_task(6, 2, 4, "regression")
    p = init_network(arch, InitScheme("stein", "glm"), X, y)
    assert task_loss(p, X, y, arch, "regression") < np.var(y) + 1e-12
