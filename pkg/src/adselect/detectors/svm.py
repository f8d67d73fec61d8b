"""One-class SVM boundary around the clean windows (scikit-learn backed)."""

from __future__ import annotations

from sklearn.svm import OneClassSVM

from ._base import DetectorError, check_windows


class OsvmDetector:
    """RBF one-class SVM; the anomaly score is the negated signed margin.

    ``nu`` upper-bounds the fraction of training windows allowed outside
    the boundary.  ``gamma="scale"`` gives the 1/(W * var) kernel width.
    """

    kind = "osvm"

    def __init__(self, nu=0.5):
        if not 0.0 < nu <= 1.0:
            raise DetectorError("nu must be in (0, 1]")
        self.nu = float(nu)
        self._model = None

    def fit(self, X):
        X = check_windows(X, min_rows=2)
        self._model = OneClassSVM(kernel="rbf", gamma="scale", nu=self.nu).fit(X)
        self._width = X.shape[1]
        return self

    def score(self, X):
        if self._model is None:
            raise DetectorError("detector is not fitted")
        X = check_windows(X, width=self._width)
        return -self._model.decision_function(X)

    def params(self):
        return {"nu": self.nu}
