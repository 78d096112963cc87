"""Deterministic desk-scale demo corpus: 15 synthetic nanosheet-composite
articles with controlled parameter values, used by the test suite, the
example scripts, and the README walkthrough."""

from __future__ import annotations

from pathlib import Path

from .docmodel import Article, ArticleMeta, ModuleBlock, SectionUnit, serialize_article

# article rows: (id, thickness nm, lateral size text, speed rpm, time h,
#                bmr, loading wt%, k neat, k filled, solvent, polymer, technique)
_ROWS = [
    ("a01", 40, "0.3 µm", 500, 12, 80, 40, 0.68, 7.28, "isopropanol", "TPU", "ball milling"),
    ("a02", 200, "1.2 µm", 300, 6, 50, 20, 0.21, 1.9, "water", "epoxy", "ball milling"),
    ("a03", 50, "450 nm", 500, 10, 100, 30, 0.19, 2.4, "ethanol", "PDMS", "wet milling"),
    ("a04", 120, "2 µm", 400, 8, 60, 25, 0.24, 2.1, "acetone", "epoxy", "sonication"),
    ("a05", 80, "600 nm", 600, 4, 90, 35, 0.3, 3.6, "water", "TPU", "sonication"),
    ("a06", 300, "3 µm", 250, 24, 40, 15, 0.22, 1.2, "isopropanol", "PDMS", "stirring"),
    ("a07", 60, "0.5 µm", 550, 9, 85, 28, 0.25, 2.9, "ethanol", "epoxy", "ball milling"),
    ("a08", 150, "1.5 µm", 350, 16, 55, 22, 0.2, 1.7, "water", "TPU", "extrusion"),
    ("a09", 90, "700 nm", 500, 5, 75, 32, 0.27, 3.1, "acetone", "PDMS", "ball milling"),
    ("a10", 250, "2.5 µm", 280, 20, 45, 18, 0.23, 1.5, "isopropanol", "epoxy", "extrusion"),
    ("a11", 30, "250 nm", 650, 14, 110, 42, 0.29, 4.8, "water", "TPU", "wet milling"),
    ("a12", 110, "1 µm", 420, 7, 65, 26, 0.26, 2.2, "ethanol", "PDMS", "sonication"),
    ("a13", 70, "550 nm", 580, 11, 95, 34, 0.28, 3.4, "acetone", "TPU", "ball milling"),
    ("a14", 180, "1.8 µm", 320, 18, 52, 21, 0.21, 1.6, "isopropanol", "epoxy", "stirring"),
    ("a15", 95, "800 nm", 480, 6, 70, 30, 0.25, 2.7, "water", "PDMS", "wet milling"),
]


def make_demo_articles() -> list[Article]:
    articles = []
    for (
        aid,
        thickness,
        lateral,
        speed,
        hours,
        bmr,
        loading,
        k_neat,
        k_filled,
        solvent,
        polymer,
        technique,
    ) in _ROWS:
        process = (
            f"Exfoliation of h-BN in {solvent} by {technique} produced BNNS. "
            f"The milling speed was {speed} rpm and the milling time was "
            f"{hours} h, with a ball-to-material ratio of {bmr}:1."
        )
        product = (
            f"The run yielded BNNS with a thickness of ~{thickness} nm and a "
            f"lateral size of {lateral}."
        )
        results = (
            f"The {polymer} composite reached a thermal conductivity of "
            f"{k_filled} W/m·K at a loading of {loading} wt%. The neat "
            f"{polymer} thermal conductivity was only {k_neat} W/m·K."
        )
        evidence = (
            f"Measured in-plane conductivity was {k_filled} W/m·K for the "
            f"{loading} wt% sample."
        )
        modules = [
            ModuleBlock(
                "Preparation",
                [
                    SectionUnit("Process", process, order=0),
                    SectionUnit("Product", product, order=1),
                ],
            ),
            ModuleBlock(
                "Characterization",
                [SectionUnit("Results", results, [evidence], order=0)],
            ),
        ]
        if int(aid[1:]) % 3 == 0:
            modules.append(
                ModuleBlock(
                    "Mechanism",
                    [
                        SectionUnit(
                            "Mechanism",
                            "Phonon transport along aligned platelets explains why "
                            f"conductivity rises in the {polymer} matrix.",
                            order=0,
                        )
                    ],
                )
            )
        if int(aid[1:]) % 5 == 0:
            modules.append(
                ModuleBlock(
                    "Modeling",
                    [
                        SectionUnit(
                            "Theory",
                            "An effective-medium model reproduces the measured "
                            "enhancement when interfacial resistance is fitted.",
                            order=0,
                        )
                    ],
                )
            )
        articles.append(
            Article(
                meta=ArticleMeta(
                    article_id=aid,
                    title=f"{technique.title()} of BNNS for {polymer} composites",
                    authors=["Demo Author"],
                    journal="Synthetic Fixtures",
                    year=2024,
                ),
                modules=modules,
            )
        )
    return articles


def write_demo_corpus(directory: str | Path) -> list[Path]:
    """Serialize the demo articles into one .txt file each."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for article in make_demo_articles():
        path = directory / f"{article.meta.article_id}.txt"
        path.write_text(serialize_article(article), "utf-8")
        paths.append(path)
    return paths
