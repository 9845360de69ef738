import importlib
import os
import sys

import pytest


@pytest.fixture(scope="session")
def core():
    """The compiled extension: installed package if available, else the build
    tree module pointed to by PATREC_CORE_DIR."""
    try:
        return importlib.import_module("patrec._core")
    except ImportError:
        pass
    build_dir = os.environ.get("PATREC_CORE_DIR")
    if not build_dir:
        pytest.skip("patrec is not installed and PATREC_CORE_DIR is unset")
    sys.path.insert(0, build_dir)
    return importlib.import_module("_core")
