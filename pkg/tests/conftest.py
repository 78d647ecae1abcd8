import numpy as np
import pytest

from percept_probe.experiments import Manifest, ManifestEntry
from percept_probe.imaging import Image, write_png


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def rgb_image(rng):
    return Image(rng.integers(0, 256, (64, 48, 3), dtype=np.uint8))


def make_grid_manifest(root, objects=("a",), backgrounds=("white", "kitchen_2d"),
                       devices=("nikon_d80", "iphone_6s"),
                       orientations=("front", "left"), write=False, size=32):
    """Manifest over the full product of the given factors."""
    entries = []
    rng = np.random.default_rng(0)
    for obj in objects:
        for bg in backgrounds:
            for dev in devices:
                for o in orientations:
                    iid = f"{obj}_{bg}_{dev}_{o}"
                    path = root / f"{iid}.png"
                    if write:
                        write_png(Image(rng.integers(0, 256, (size, size, 3), dtype=np.uint8)),
                                  path)
                    entries.append(ManifestEntry(iid, path, obj, bg, dev, o, aliases=(obj,)))
    return Manifest(entries, devices=devices, reference_device=devices[0])


@pytest.fixture
def grid_manifest():
    return make_grid_manifest


ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    """Remember one acceptance outcome for the end-of-run summary."""
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
