"""Render qdimer CSV outputs into figure files from JSON recipes.

The renderer is a pure function of the CSV contents and the recipe: no
physics is recomputed here, fonts/DPI/metadata are pinned, and rerendering
produces byte-identical files.  Recipes for every preset ship with the
package and can be addressed by name.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["RecipeError", "load_recipe", "shipped_recipes", "render", "main"]

DPI = 150

matplotlib.rcParams.update(
    {
        "svg.hashsalt": "qdimer-plots",
        "font.family": "DejaVu Sans",
        "figure.max_open_warning": 0,
    }
)


class RecipeError(ValueError):
    """Recipe or data problem; the message names what is missing."""


def shipped_recipes() -> dict[str, Path]:
    root = resources.files("qdimer_plots") / "recipes"
    return {p.name.removesuffix(".json"): Path(str(p)) for p in root.iterdir() if p.name.endswith(".json")}


def load_recipe(source: str) -> dict:
    """Load a recipe from a JSON file path or a shipped recipe name."""
    path = Path(source)
    if not path.exists():
        shipped = shipped_recipes()
        if source in shipped:
            path = shipped[source]
        else:
            raise RecipeError(
                f"recipe {source!r} is neither a file nor a shipped recipe "
                f"(shipped: {', '.join(sorted(shipped))})"
            )
    recipe = json.loads(path.read_text())
    for key in ("csv_paths", "panel_layout", "panels"):
        if key not in recipe:
            raise RecipeError(f"recipe is missing {key!r}")
    return recipe


def _load_csv(path: Path) -> dict[str, np.ndarray]:
    if not path.exists():
        raise RecipeError(f"CSV file not found: {path}")
    with path.open(newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise RecipeError(f"CSV file has no header: {path}")
        columns: dict[str, list] = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                columns[name].append(row[name])
    if not next(iter(columns.values()), []):
        raise RecipeError(f"CSV file has no data rows: {path}")
    out = {}
    for name, values in columns.items():
        try:
            out[name] = np.array([float(v) for v in values])
        except ValueError:
            out[name] = np.array(values)
    return out


def _column(table: dict[str, np.ndarray], name: str, csv_name: str) -> np.ndarray:
    if name not in table:
        raise RecipeError(f"column {name!r} not present in {csv_name} (has: {', '.join(table)})")
    return table[name]


def _prefixed_columns(table: dict[str, np.ndarray], prefix: str, csv_name: str) -> list[str]:
    names = sorted(
        (n for n in table if n.startswith(prefix + "_")),
        key=lambda n: int(n.rsplit("_", 1)[1]),
    )
    if not names:
        raise RecipeError(f"no columns with prefix {prefix!r} in {csv_name}")
    return names


def _apply_filter(table, spec, csv_name):
    mask = np.ones(len(next(iter(table.values()))), dtype=bool)
    for column, wanted in spec.items():
        values = _column(table, column, csv_name)
        if values.dtype.kind == "f":
            mask &= np.isclose(values, float(wanted), rtol=1e-12, atol=0.0)
        else:
            mask &= values == str(wanted)
    return {name: values[mask] for name, values in table.items()}


def _group_rows(table, group_by, csv_name):
    if not group_by:
        yield "", table
        return
    keys = [_column(table, c, csv_name) for c in group_by]
    n = len(keys[0])
    seen: list[tuple] = []
    for i in range(n):
        key = tuple(k[i] for k in keys)
        if key not in seen:
            seen.append(key)
    for key in seen:
        mask = np.ones(n, dtype=bool)
        for k, v in zip(keys, key):
            mask &= (k == v) if k.dtype.kind != "f" else np.isclose(k, v, rtol=1e-12, atol=0.0)
        label = ", ".join(
            f"{c}={v:g}" if isinstance(v, (float, np.floating)) else f"{c}={v}"
            for c, v in zip(group_by, key)
        )
        yield label, {name: values[mask] for name, values in table.items()}


def _panel_lines(ax, panel, table, csv_name):
    x_name = panel["x"]
    y_name = panel["y"]
    for label, group in _group_rows(table, panel.get("group_by", []), csv_name):
        x = _column(group, x_name, csv_name)
        y = _column(group, y_name, csv_name)
        ax.plot(x, y, label=label or None, linewidth=1.2)
    if panel.get("legend", True) and panel.get("group_by"):
        ax.legend(fontsize=7)


def _panel_eigen_branches(ax, fig, panel, table, csv_name):
    x = _column(table, panel["x"], csv_name)
    y_names = _prefixed_columns(table, panel["y_prefix"], csv_name)
    color_names = _prefixed_columns(table, panel["color_prefix"], csv_name)
    if len(color_names) != len(y_names):
        raise RecipeError(
            f"prefix groups {panel['y_prefix']!r} and {panel['color_prefix']!r} differ in size"
        )
    values = np.concatenate([table[c] for c in color_names])
    vmin, vmax = float(np.nanmin(values)), float(np.nanmax(values))
    scatter = None
    for y_name, c_name in zip(y_names, color_names):
        scatter = ax.scatter(
            x, table[y_name], c=table[c_name], s=2.0, vmin=vmin, vmax=vmax, cmap="viridis"
        )
    fig.colorbar(scatter, ax=ax, label="|lambda|")


def render(recipe: dict, out_path: Path, data_dir: Optional[Path] = None):
    """Render a recipe to ``out_path`` (.png or .svg); returns the Figure."""
    data_dir = Path(data_dir) if data_dir is not None else Path(".")
    tables = []
    for rel in recipe["csv_paths"]:
        path = Path(rel)
        tables.append(_load_csv(path if path.is_absolute() else data_dir / path))

    layout = recipe["panel_layout"]
    rows, cols = int(layout["rows"]), int(layout["cols"])
    if rows * cols < len(recipe["panels"]):
        raise RecipeError(f"panel_layout {rows}x{cols} too small for {len(recipe['panels'])} panels")
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.2 * rows), squeeze=False)
    flat_axes = axes.ravel()

    for index, panel in enumerate(recipe["panels"]):
        ax = flat_axes[index]
        csv_index = int(panel.get("csv", 0))
        csv_name = recipe["csv_paths"][csv_index]
        table = tables[csv_index]
        if "filter" in panel:
            table = _apply_filter(table, panel["filter"], csv_name)
            if not len(next(iter(table.values()))):
                raise RecipeError(f"filter {panel['filter']} matches no rows of {csv_name}")
        kind = panel.get("kind", "lines")
        if kind == "lines":
            _panel_lines(ax, panel, table, csv_name)
        elif kind == "eigen_branches":
            _panel_eigen_branches(ax, fig, panel, table, csv_name)
        else:
            raise RecipeError(f"unknown panel kind {kind!r}")
        scales = panel.get("axis_scales", {})
        ax.set_xscale(scales.get("x", "linear"))
        ax.set_yscale(scales.get("y", "linear"))
        if "x_lim" in panel:
            ax.set_xlim(panel["x_lim"])
        ax.set_xlabel(panel.get("x_label", panel.get("x", "")))
        ax.set_ylabel(panel.get("y_label", panel.get("y", "")))
        if "title" in panel:
            ax.set_title(panel["title"], fontsize=9)

    for index in range(len(recipe["panels"]), rows * cols):
        flat_axes[index].set_visible(False)

    for marker in recipe.get("markers", []):
        csv_index = int(marker["csv"])
        csv_name = recipe["csv_paths"][csv_index]
        positions = _column(tables[csv_index], marker["column"], csv_name)
        targets = marker.get("panels")
        panel_ids = range(len(recipe["panels"])) if targets is None else targets
        for pid in panel_ids:
            for value in positions:
                flat_axes[pid].axvline(float(value), color="crimson", linestyle="--", linewidth=0.9)

    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    suffix = out_path.suffix.lower()
    if suffix == ".svg":
        metadata = {"Date": None, "Creator": None}
    elif suffix == ".png":
        metadata = {"Software": None}
    else:
        raise RecipeError(f"unsupported output format {suffix!r}; use .png or .svg")
    fig.savefig(out_path, dpi=DPI, metadata=metadata)
    plt.close(fig)
    return fig


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="qdimer-render", description="Render qdimer CSV output into a figure file."
    )
    parser.add_argument("recipe", nargs="?", help="recipe JSON path, or the name of a shipped recipe")
    parser.add_argument("output", nargs="?", help="output image path (.png or .svg)")
    parser.add_argument(
        "--data-dir",
        default=".",
        help="directory against which relative csv_paths are resolved (default: cwd)",
    )
    parser.add_argument("--list", action="store_true", help="list shipped recipe names and exit")
    args = parser.parse_args(argv)

    if args.list:
        for name in sorted(shipped_recipes()):
            print(name)
        return 0
    if args.recipe is None or args.output is None:
        parser.error("recipe and output are required unless --list is given")
    try:
        recipe = load_recipe(args.recipe)
        render(recipe, Path(args.output), Path(args.data_dir))
    except RecipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
