import os
from pathlib import Path

import pytest

DATA_DIR = Path(os.environ.get("QKSVM_DATA_DIR", "/root/data"))

MNIST_FILES = [
    "mnist-train-images-idx3-ubyte.gz",
    "mnist-train-labels-idx1-ubyte.gz",
]
FMNIST_FILES = [
    "fmnist-train-images-idx3-ubyte.gz",
    "fmnist-train-labels-idx1-ubyte.gz",
]


def has_dataset(files) -> bool:
    return all((DATA_DIR / f).exists() for f in files)


needs_mnist = pytest.mark.skipif(
    not has_dataset(MNIST_FILES), reason=f"MNIST IDX files not found in {DATA_DIR}"
)
needs_fmnist = pytest.mark.skipif(
    not has_dataset(FMNIST_FILES), reason=f"Fashion-MNIST IDX files not found in {DATA_DIR}"
)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR
