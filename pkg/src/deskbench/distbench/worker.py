"""Worker side of the master-worker training loop.

A worker preloads its data part, greets the master with HELLO, then
answers each PARAMS broadcast with one local epoch and an UPDATE. The
local epoch is a plain mini-batch subgradient pass with a constant
learning rate, seeded by (global seed, worker id, round) so any run can
be replayed exactly, including by a single-node oracle.
"""

import logging
import socket
import time

import numpy as np

from ..dataio import DenseDataset, load_dense
from ..errors import DataFormatError, ProtocolError
from ..linmodels import sigmoid
from . import codec

log = logging.getLogger(__name__)

# Mini-batch size of one local epoch. Fixed protocol-wide: the CONFIG
# frame carries only lambda and the learning rate, so both ends must
# agree on this out of band.
LOCAL_EPOCH_BATCH = 64

EXIT_OK = 0
EXIT_DATA = 2
EXIT_PROTOCOL = 3


def epoch_rng(seed: int, worker_id: int, round_: int) -> np.random.Generator:
    """The round's generator; shared by workers and the local oracle."""
    return np.random.default_rng([seed, worker_id, round_])


def local_epoch(algo: str, weights, bias: float, features, y01, lambda_: float,
                lr: float, rng, batch_size: int = LOCAL_EPOCH_BATCH):
    """One constant-rate mini-batch epoch from the given parameters.

    logistic: regularized cross-entropy gradient steps. svm: hinge
    subgradient steps on +-1 labels. The trailing partial batch is
    included. Returns (weights, bias) as new arrays.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(y01, dtype=np.float64)
    w = np.array(weights, dtype=np.float64)
    b = float(bias)
    n = X.shape[0]
    pm = 2.0 * y - 1.0  # {0,1} -> {-1,+1} for the hinge branch
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        if algo == "logistic":
            z = X[idx] @ w + b
            residual = sigmoid(z) - y[idx]
            grad_w = X[idx].T @ residual / idx.size + lambda_ * w
            grad_b = float(np.mean(residual))
        elif algo == "svm":
            margins = pm[idx] * (X[idx] @ w + b)
            viol = margins < 1.0
            signed = pm[idx] * viol
            grad_w = lambda_ * w - X[idx].T @ signed / idx.size
            grad_b = -float(np.mean(signed))
        else:
            raise ProtocolError(f"unknown algorithm {algo!r}")
        w -= lr * grad_w
        b -= lr * grad_b
    return w, b


def _check_part(ds: DenseDataset) -> None:
    if not ds.is_binary():
        raise DataFormatError("data part labels must be 0/1")


def _split_params(values, num_features: int):
    if values.size != num_features + 1:
        raise ProtocolError(f"parameter vector has {values.size} floats, "
                            f"expected {num_features + 1}")
    return values[:num_features].copy(), float(values[num_features])


def _connect(address: str, attempts: int, delay_s: float) -> socket.socket:
    host, _, port = address.rpartition(":")
    last = None
    for attempt in range(attempts):
        try:
            return socket.create_connection((host, int(port)), timeout=30.0)
        except OSError as exc:
            last = exc
            log.warning("connect attempt %d/%d to %s failed: %s",
                        attempt + 1, attempts, address, exc)
            time.sleep(delay_s)
    raise ProtocolError(f"could not connect to {address} after {attempts} attempts: {last}")


def _serve_once(sock: socket.socket, ds: DenseDataset, worker_id: int) -> int:
    """One full conversation on an established connection."""
    sock.settimeout(None)  # rounds may be arbitrarily long; block on reads
    config = None
    with sock.makefile("rb") as stream:
        sock.sendall(codec.pack_hello(worker_id, ds.num_rows, ds.num_features))
        while True:
            frame = codec.read_frame(stream)
            if frame is None:
                raise ConnectionResetError("master closed the connection mid-run")
            if frame.kind == "config":
                config = frame.data
            elif frame.kind == "params":
                if config is None:
                    raise ProtocolError("params received before config")
                w, b = _split_params(frame.data["values"], ds.num_features)
                rng = epoch_rng(config["seed"], worker_id, frame.data["round"])
                w, b = local_epoch(config["algo"], w, b, ds.features, ds.labels,
                                   config["lambda_"], config["lr"], rng)
                update = codec.pack_update(frame.data["round"], ds.num_rows,
                                           np.append(w, b))
                sock.sendall(update)
            elif frame.kind == "done":
                return EXIT_OK
            elif frame.kind == "error":
                log.error("master reported: %s", frame.data["message"])
                return EXIT_PROTOCOL
            else:
                raise ProtocolError(f"unexpected {frame.kind} frame from master")


def run_worker(connect: str, part_path, worker_id: int,
               reconnect_attempts: int = 3, reconnect_delay_s: float = 0.2) -> int:
    """Serve one data part. Returns a process exit status (0/2/3).

    An unparseable part is reported to the master as an ERROR frame in
    place of HELLO, then the worker exits with a data-error status. A
    lost connection is retried from HELLO a bounded number of times.
    """
    try:
        ds = load_dense(part_path)
        _check_part(ds)
    except (DataFormatError, ValueError, OSError) as exc:
        log.error("cannot load part %s: %s", part_path, exc)
        try:
            sock = _connect(connect, reconnect_attempts, reconnect_delay_s)
            with sock:
                sock.sendall(codec.pack_error(f"worker {worker_id}: bad part: {exc}"))
        except ProtocolError:
            pass
        return EXIT_DATA

    for attempt in range(reconnect_attempts):
        try:
            sock = _connect(connect, reconnect_attempts, reconnect_delay_s)
        except ProtocolError as exc:
            log.error("%s", exc)
            return EXIT_PROTOCOL
        try:
            with sock:
                return _serve_once(sock, ds, worker_id)
        except ProtocolError as exc:
            # malformed traffic: drop the connection and give up
            log.error("protocol failure, dropping connection: %s", exc)
            return EXIT_PROTOCOL
        except OSError as exc:
            log.error("connection lost (attempt %d/%d): %s",
                      attempt + 1, reconnect_attempts, exc)
        time.sleep(reconnect_delay_s)
    return EXIT_PROTOCOL
