"""Adversarially trained autoencoder pair scoring windows by reconstruction error.

One encoder E feeds two decoders.  D1 learns to reconstruct the window; D2
learns to reconstruct it while also being trained to tell D1's output from
a real window, which D1 in turn learns to fool.  At epoch n the two loss
terms are weighted 1/n and 1 - 1/n, shifting emphasis from plain
reconstruction to the adversarial game as training proceeds.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ._base import DetectorError, check_windows


def _mlp(sizes, out_activation=None):
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(nn.Linear(sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(nn.ReLU())
    if out_activation is not None:
        layers.append(out_activation)
    return nn.Sequential(*layers)


class UsadDetector:
    """Encoder 6->4->2 with mirrored decoders 2->4->6.

    Decoder outputs pass through a sigmoid, so inputs are expected roughly
    in [0, 1] (min-max scaled windows); values far outside reconstruct
    poorly by construction, which is the point.

    Parameters
    ----------
    alpha, beta : float
        Score weights for the two reconstruction terms; must sum to 1.
    n_epochs, batch_size, lr : training schedule.
    seed : int
        Fixes both network init and batch shuffling.
    """

    kind = "usad"

    def __init__(self, alpha=0.5, beta=0.5, n_epochs=100, batch_size=64, lr=1e-3, latent=2, hidden=4, seed=0):
        if abs(alpha + beta - 1.0) > 1e-9:
            raise DetectorError("alpha and beta must sum to 1")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.n_epochs = int(n_epochs)
        self.batch_size = int(batch_size)
        self.lr = float(lr)
        self.latent = int(latent)
        self.hidden = int(hidden)
        self.seed = int(seed)
        self.encoder = None
        self.decoder1 = None
        self.decoder2 = None
        # per-epoch mean reconstruction error of each decoder on its own pass;
        # recon2 rises once the adversarial weight dominates, by design
        self.epoch_recon1 = []
        self.epoch_recon2 = []
        # per-epoch mean of each decoder's optimized objective; loss2 turns
        # negative as the adversarial term grows, so it trends downward
        self.epoch_loss1 = []
        self.epoch_loss2 = []

    def fit(self, X):
        X = check_windows(X, min_rows=2)
        self._width = w = X.shape[1]
        torch.manual_seed(self.seed)
        self.encoder = _mlp([w, self.hidden, self.latent])
        self.decoder1 = _mlp([self.latent, self.hidden, w], out_activation=nn.Sigmoid())
        self.decoder2 = _mlp([self.latent, self.hidden, w], out_activation=nn.Sigmoid())
        opt1 = torch.optim.Adam(list(self.encoder.parameters()) + list(self.decoder1.parameters()), lr=self.lr)
        opt2 = torch.optim.Adam(list(self.encoder.parameters()) + list(self.decoder2.parameters()), lr=self.lr)

        data = torch.as_tensor(X, dtype=torch.float32)
        rng = np.random.default_rng(self.seed)
        mse = nn.MSELoss()
        self.epoch_recon1, self.epoch_recon2 = [], []
        self.epoch_loss1, self.epoch_loss2 = [], []
        for epoch in range(1, self.n_epochs + 1):
            w1 = 1.0 / epoch
            w2 = 1.0 - w1
            order = rng.permutation(len(data))
            r1_sum = r2_sum = l1_sum = l2_sum = 0.0
            n_batches = 0
            for start in range(0, len(data), self.batch_size):
                batch = data[order[start : start + self.batch_size]]

                z = self.encoder(batch)
                rec1 = self.decoder1(z)
                rec2viarec1 = self.decoder2(self.encoder(rec1))
                loss1 = w1 * mse(rec1, batch) + w2 * mse(rec2viarec1, batch)
                opt1.zero_grad()
                loss1.backward()
                opt1.step()

                z = self.encoder(batch)
                rec2 = self.decoder2(z)
                rec2viarec1 = self.decoder2(self.encoder(self.decoder1(z)))
                loss2 = w1 * mse(rec2, batch) - w2 * mse(rec2viarec1, batch)
                opt2.zero_grad()
                loss2.backward()
                opt2.step()

                with torch.no_grad():
                    r1_sum += float(mse(self.decoder1(self.encoder(batch)), batch))
                    r2_sum += float(mse(self.decoder2(self.encoder(batch)), batch))
                l1_sum += float(loss1.detach())
                l2_sum += float(loss2.detach())
                n_batches += 1
            self.epoch_recon1.append(r1_sum / n_batches)
            self.epoch_recon2.append(r2_sum / n_batches)
            self.epoch_loss1.append(l1_sum / n_batches)
            self.epoch_loss2.append(l2_sum / n_batches)
        self.encoder.eval()
        self.decoder1.eval()
        self.decoder2.eval()
        return self

    def score(self, X):
        if self.encoder is None:
            raise DetectorError("detector is not fitted")
        X = check_windows(X, width=self._width)
        with torch.no_grad():
            w = torch.as_tensor(X, dtype=torch.float32)
            rec1 = self.decoder1(self.encoder(w))
            rec2 = self.decoder2(self.encoder(rec1))
            err1 = torch.mean((w - rec1) ** 2, dim=1)
            err2 = torch.mean((w - rec2) ** 2, dim=1)
            scores = self.alpha * err1 + self.beta * err2
        return scores.numpy().astype(np.float64)

    def params(self):
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "n_epochs": self.n_epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "seed": self.seed,
        }
