"""Embedded real data sets.

Air quality: carbon monoxide measurements (ppm) from a refinery stack, 31
daily readings taken by the refinery and 9 independent readings by the Bay
Area Air Quality Management District (DASL air-quality data).

Cloud seeding: rainfall (acre-feet) from 26 unseeded and 26 silver-nitrate
seeded clouds.

Values are stored sorted ascending, as published.
"""

from __future__ import annotations

from .model import Sample

_DATA = {
    # refinery measurements, air-quality table
    "air-refinery": (21, 30, 30, 34, 36, 37, 38, 40, 42, 43, 43, 45, 52, 55, 58, 58,
                     58, 59, 63, 63, 71, 75, 85, 86, 86, 99, 102, 102, 141, 153, 161),
    # BAAQMD measurements, air-quality table; 170 is the outlier
    "air-baaqmd": (4, 12.5, 15, 15, 20, 20, 20, 25, 170),
    # unseeded clouds, rainfall table
    "cloud-natural": (1.0, 4.9, 4.9, 11.5, 17.3, 21.7, 24.4, 26.1, 26.3, 28.6, 29.0, 36.6,
                      41.1, 47.3, 68.5, 81.2, 87.0, 95.0, 147.8, 163.0, 244.3, 321.2, 345.5,
                      372.4, 830.1, 1202.6),
    # seeded clouds, rainfall table
    "cloud-seeded": (4.1, 7.7, 17.5, 31.4, 32.7, 40.6, 92.4, 115.3, 118.3, 119.0, 129.6,
                     198.6, 200.7, 242.5, 255.0, 274.7, 274.7, 302.8, 334.1, 430.0, 489.1,
                     703.4, 978.0, 1656.0, 1697.8, 2745.6),
}

NAMES = tuple(_DATA)
BAAQMD_OUTLIER_INDEX = 8


def load(name: str) -> Sample:
    """Embedded data set ``name`` as a :class:`Sample` labelled with its name."""
    try:
        values = _DATA[name]
    except KeyError:
        raise KeyError(f"unknown dataset {name!r}; choose from {', '.join(NAMES)}") from None
    return Sample(values, label=name)


def cloud_cases() -> dict:
    """The four cloud comparisons: full data and three outlier-deleted variants.

    ``I`` drops the largest unseeded value, ``II`` the three largest seeded
    values, ``III`` both.
    """
    nat, seed = load("cloud-natural").values, load("cloud-seeded").values
    return {
        "full": (Sample(nat, "cloud-natural"), Sample(seed, "cloud-seeded")),
        "I": (Sample(nat[:-1], "cloud-natural"), Sample(seed, "cloud-seeded")),
        "II": (Sample(nat, "cloud-natural"), Sample(seed[:-3], "cloud-seeded")),
        "III": (Sample(nat[:-1], "cloud-natural"), Sample(seed[:-3], "cloud-seeded")),
    }
