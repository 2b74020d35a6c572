"""scikit-learn compatible wrappers: a trainable classifier and an attack transformer."""
import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .arch import build_network
from .attacks import AttackConfig, CWParams, run_attack
from .network import SGD, Adam, Network, train


class NetworkClassifier(ClassifierMixin, BaseEstimator):
    """ReLU network trained with cross-entropy.

    Parameters
    ----------
    arch : str
        Architecture string, e.g. ``"mlp:64-32-10"`` or
        ``"cnn:1x8x8:conv(8,3,1,1)-mlp(10)"``. The input shape and class count
        it declares must match the data.
    optimizer : {"sgd", "adam"}
    learning_rate, epochs, batch_size : training knobs.
    bias : bool
        Give every linear/conv layer a bias.
    random_state : int
        Seeds both the initialization and the minibatch order.
    """

    def __init__(self, arch="mlp:2-16-2", optimizer="sgd", learning_rate=0.1, epochs=20,
                 batch_size=32, bias=True, random_state=0):
        self.arch = arch
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.bias = bias
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, allow_nd=True, dtype=np.float64)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        net = build_network(self.arch, seed=self.random_state, bias=self.bias)
        if len(self.classes_) > net.class_count:
            raise ValueError(f"{len(self.classes_)} classes but arch outputs {net.class_count}")
        opt = Adam(self.learning_rate) if self.optimizer == "adam" else SGD(self.learning_rate)
        X = X.reshape((len(X),) + net.input_shape)
        self.network_ = train(net, (X, y_idx), opt, self.epochs, self.batch_size,
                              self.random_state)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def _inputs(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, allow_nd=True, dtype=np.float64)
        return X.reshape((len(X),) + self.network_.input_shape)

    def decision_function(self, X):
        X = self._inputs(X)
        return self.network_.logits(X)

    def predict_proba(self, X):
        X = self._inputs(X)
        return self.network_.predict_proba(X)

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

    @classmethod
    def from_network(cls, network, classes=None):
        """Wrap an already trained :class:`Network`."""
        clf = cls(arch=None)
        clf.network_ = network
        clf.classes_ = np.arange(network.class_count) if classes is None else np.asarray(classes)
        clf.n_features_in_ = network.input_dim
        return clf


def _network_of(estimator):
    if isinstance(estimator, Network):
        return estimator
    check_is_fitted(estimator, "network_")
    return estimator.network_


class AdversarialAttack(TransformerMixin, BaseEstimator):
    """Turn inputs into adversarial inputs against ``estimator``.

    ``transform`` attacks with the model's own predictions as labels, so the
    attack can sit in a pipeline; :meth:`generate` accepts true labels.
    """

    def __init__(self, estimator=None, method="fgsm", epsilon=0.02, iterations=1,
                 clip_alpha=None, target=None, c=10.0, kappa=0.0, learning_rate=0.01,
                 steps=10):
        self.estimator = estimator
        self.method = method
        self.epsilon = epsilon
        self.iterations = iterations
        self.clip_alpha = clip_alpha
        self.target = target
        self.c = c
        self.kappa = kappa
        self.learning_rate = learning_rate
        self.steps = steps

    def fit(self, X=None, y=None):
        self.network_ = _network_of(self.estimator)
        self.config_ = AttackConfig(self.method, self.epsilon, self.iterations, self.clip_alpha,
                                    self.target,
                                    CWParams(self.c, self.kappa, self.learning_rate, self.steps))
        return self

    def generate(self, X, y=None):
        if not hasattr(self, "network_"):
            self.fit()
        X = check_array(X, allow_nd=True, dtype=np.float64)
        X = X.reshape((len(X),) + self.network_.input_shape)
        labels = self.network_.predict(X) if y is None else np.asarray(y, dtype=int)
        results = run_attack(self.network_, X, labels, self.config_)
        self.results_ = results
        return np.array([r.adversarial for r in results])

    def transform(self, X):
        X = np.asarray(X)
        return self.generate(X).reshape(X.shape)
