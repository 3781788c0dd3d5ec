import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from meshmart.platform import open_platform  # noqa: E402


@pytest.fixture
def platform(tmp_path):
    p = open_platform(data_dir=str(tmp_path / "plat"), fsync=False)
    yield p
    p.close()


@pytest.fixture
def acme(platform):
    """Platform with tenants acme and globex provisioned; returns helpers."""
    root = platform.catalog.get_principal("platform", "root")
    acme_boot = platform.create_tenant(root, "acme", "Acme")
    globex_boot = platform.create_tenant(root, "globex", "Globex")
    return {
        "platform": platform,
        "root": root,
        "acme_admin": platform.authenticate(acme_boot["api_key"]),
        "globex_admin": platform.authenticate(globex_boot["api_key"]),
        "acme_key": acme_boot["api_key"],
        "globex_key": globex_boot["api_key"],
    }
