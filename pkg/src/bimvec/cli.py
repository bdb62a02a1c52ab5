"""Pipeline front door: parse -> graph -> snapshot -> embed -> query/predict.

Every stage reads and writes plain files so runs are reproducible and each
step is independently inspectable. Outputs are written atomically (temp file
plus rename). Exit codes: 0 success, 2 usage error, 3 input data error,
4 internal invariant violation.
"""

from __future__ import annotations

import functools
import json
import logging
import os
import sys

import click

from . import space_grid, temporal
from .config import RunConfig, load_config
from .errors import BimvecError, ConfigError, InternalInvariantError
from .fileio import atomic_write_text
from .graph import PropertyGraph
from .ifc_graph import attach_properties, build_graph
from .sgns import EmbeddingMatrix, attach_labels, train
from .step_parser import parse_step_file, serialize_step, validate_references
from .store import export_projector, knn, load_labeled_csv, predict_comfort
from .temporal import TemporalGraph, Snapshot, adjacency_tensor, build_snapshots, flatten
from .walks import generate_walks

logger = logging.getLogger(__name__)

SENSOR_LABEL = "SENSOR"

_EXIT_USAGE = 2
_EXIT_DATA = 3
_EXIT_INTERNAL = 4


def _setup_logging() -> None:
    level_name = os.environ.get("BIMVEC_LOG", "INFO").upper()
    level = getattr(logging, level_name, logging.INFO)
    root = logging.getLogger()
    # Rebind the handler each invocation so the stream follows the current
    # sys.stderr (test runners swap it per command).
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(level)


def _echo_config(cfg: RunConfig) -> None:
    for line in cfg.to_lines():
        logger.info("config %s", line)


def _command(fn):
    """Map toolkit errors onto categorized exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_EXIT_USAGE)
        except InternalInvariantError as exc:
            click.echo(f"internal error: {exc}", err=True)
            sys.exit(_EXIT_INTERNAL)
        except (BimvecError, OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_EXIT_DATA)

    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Flat key=value configuration file.")
@click.pass_context
def main(ctx, config_path):
    """Convert IFC building models into property graphs and embeddings."""
    _setup_logging()
    try:
        ctx.obj = load_config(config_path) if config_path else RunConfig()
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_EXIT_USAGE)


# ---------------------------------------------------------------------------
# parse
# ---------------------------------------------------------------------------

@main.command("parse")
@click.argument("ifc_path", type=click.Path(exists=True))
@click.option("--dump", "dump_path", type=click.Path(), default=None,
              help="Write the re-serialized model to this path.")
@click.pass_obj
@_command
def cmd_parse(cfg: RunConfig, ifc_path, dump_path):
    """Parse an IFC file and print an entity summary."""
    _echo_config(cfg)
    model = parse_step_file(ifc_path)
    type_counts: dict[str, int] = {}
    for entity in model.in_id_order():
        type_counts[entity.type_name] = type_counts.get(entity.type_name, 0) + 1
    dangling = validate_references(model)
    click.echo(f"entities\t{len(model)}")
    click.echo(f"types\t{len(type_counts)}")
    click.echo(f"dangling_references\t{len(dangling)}")
    for type_name in sorted(type_counts, key=lambda t: (-type_counts[t], t))[:10]:
        click.echo(f"type\t{type_name}\t{type_counts[type_name]}")
    for referencing, missing in dangling:
        click.echo(f"dangling\t{referencing}\t{missing}")
    if dump_path:
        atomic_write_text(dump_path, serialize_step(model))
        click.echo(f"dump\t{dump_path}")


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------

def _load_sensor_manifest(path) -> tuple[list[dict], list[dict]]:
    with open(path, "r", encoding="utf-8") as fp:
        manifest = json.load(fp)
    return manifest.get("sensors", []), manifest.get("anchors", [])


@main.command("graph")
@click.argument("ifc_path", type=click.Path(exists=True))
@click.option("--footprints", "footprints_path", type=click.Path(exists=True),
              required=True, help="Sidecar JSON with space polygons.")
@click.option("--sensors", "sensors_path", type=click.Path(exists=True),
              default=None, help="JSON manifest of sensors and anchors.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--cell-size", type=float, default=None)
@click.option("--strict/--lenient", "strict", default=None)
@click.pass_obj
@_command
def cmd_graph(cfg: RunConfig, ifc_path, footprints_path, sensors_path,
              out_path, cell_size, strict):
    """Build the building property graph with cells and sensors."""
    cfg = cfg.updated(cell_size=cell_size, strict=strict)
    _echo_config(cfg)
    model = parse_step_file(ifc_path)
    graph = build_graph(model, cfg.relation_mapping(), strict=cfg.strict)
    attach_properties(graph, model)

    spaces = {}
    for footprint in space_grid.load_footprints(footprints_path):
        if footprint.space_node not in graph:
            raise BimvecError(
                f"footprint references unknown space entity "
                f"#{footprint.space_node}"
            )
        space = space_grid.discretize(footprint, cfg.cell_size)
        space_grid.merge_into(graph, space, queen=cfg.adjacency == "queen")
        spaces[space.space_node] = space

    if sensors_path:
        sensors, anchors = _load_sensor_manifest(sensors_path)
        for record in sensors:
            space = _space_for(spaces, record)
            node_id = temporal.sensor_node_id(str(record["id"]))
            graph.add_node(node_id, SENSOR_LABEL, {
                "space": space.space_node,
                "x": float(record["position"][0]),
                "y": float(record["position"][1]),
            })
            radius = _radius(record, cfg.sensor_radius, space.cell_size)
            space_grid.attach_fixed_node(
                graph, space, node_id, tuple(record["position"]), radius,
                strict=cfg.strict,
            )
        for record in anchors:
            space = _space_for(spaces, record)
            node_id = str(record["entity_id"])
            radius = _radius(record, cfg.sensor_radius, space.cell_size)
            space_grid.attach_fixed_node(
                graph, space, node_id, tuple(record["position"]), radius,
                strict=cfg.strict,
            )

    graph.validate()
    atomic_write_text(out_path, graph.to_text())
    click.echo(f"nodes\t{len(graph)}")
    click.echo(f"edges\t{graph.edge_count}")
    click.echo(f"graph\t{out_path}")


def _space_for(spaces: dict, record: dict) -> space_grid.DiscretizedSpace:
    space_node = str(record["space_id"])
    if space_node not in spaces:
        raise BimvecError(f"manifest references space {space_node!r} "
                          "with no footprint")
    return spaces[space_node]


def _radius(record: dict, configured: float | None, cell_size: float) -> float:
    if "radius" in record:
        return float(record["radius"])
    return configured if configured is not None else cell_size


# ---------------------------------------------------------------------------
# snapshot
# ---------------------------------------------------------------------------

@main.command("snapshot")
@click.argument("graph_path", type=click.Path(exists=True))
@click.option("--readings", "readings_path", type=click.Path(exists=True),
              default=None)
@click.option("--fixes", "fixes_path", type=click.Path(exists=True),
              default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--step", type=int, default=None)
@click.pass_obj
@_command
def cmd_snapshot(cfg: RunConfig, graph_path, readings_path, fixes_path,
                 out_dir, step):
    """Build per-window snapshots and export the adjacency tensor."""
    cfg = cfg.updated(step=step)
    _echo_config(cfg)
    with open(graph_path, "r", encoding="utf-8") as fp:
        base = PropertyGraph.from_text(fp.read())
    spaces = space_grid.spaces_from_graph(base)
    readings = temporal.load_readings_csv(readings_path) if readings_path else []
    fixes = temporal.load_fixes_csv(fixes_path) if fixes_path else []
    tg = build_snapshots(
        base, spaces, readings, fixes, cfg.step,
        occupant_radius=cfg.occupant_radius, max_gap=cfg.max_gap,
    )
    export = adjacency_tensor(tg)

    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "snapshots"), exist_ok=True)
    manifest = dict(export.manifest)
    manifest["step"] = cfg.step
    atomic_write_text(os.path.join(out_dir, "manifest.json"),
                      json.dumps(manifest, indent=2) + "\n")
    record_lines = ["t,i,j,w"]
    record_lines += [f"{t},{i},{j},{w!r}" for t, i, j, w in export.records]
    atomic_write_text(os.path.join(out_dir, "tensor.csv"),
                      "\n".join(record_lines) + "\n")
    atomic_write_text(os.path.join(out_dir, "base.tsv"), base.to_text())
    for index, snapshot in enumerate(tg.snapshots):
        atomic_write_text(
            os.path.join(out_dir, "snapshots", f"{index:06d}.tsv"),
            snapshot.graph.to_text(),
        )
    click.echo(f"snapshots\t{len(tg)}")
    click.echo(f"tensor_records\t{len(export.records)}")
    click.echo(f"store\t{out_dir}")


def _load_temporal_store(store_dir) -> TemporalGraph:
    with open(os.path.join(store_dir, "manifest.json"), encoding="utf-8") as fp:
        manifest = json.load(fp)
    with open(os.path.join(store_dir, "base.tsv"), encoding="utf-8") as fp:
        base = PropertyGraph.from_text(fp.read())
    snapshots = []
    for index, timestamp in enumerate(manifest["timestamps"]):
        path = os.path.join(store_dir, "snapshots", f"{index:06d}.tsv")
        with open(path, encoding="utf-8") as fp:
            snapshots.append(Snapshot(timestamp, PropertyGraph.from_text(fp.read())))
    node_index = {nid: i for i, nid in enumerate(manifest["node_index"])}
    return TemporalGraph(base, snapshots, node_index)


# ---------------------------------------------------------------------------
# embed
# ---------------------------------------------------------------------------

@main.command("embed")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--flatten", "flatten_mode", default=None,
              help="union or slice:<t>; used for a temporal store input.")
@click.option("--dimension", type=int, default=None)
@click.option("--window", type=int, default=None)
@click.option("--negatives", type=int, default=None)
@click.option("--epochs", type=int, default=None)
@click.option("--initial-lr", type=float, default=None)
@click.option("--min-lr", type=float, default=None)
@click.option("--p", type=float, default=None)
@click.option("--q", type=float, default=None)
@click.option("--walk-length", type=int, default=None)
@click.option("--walks-per-node", type=int, default=None)
@click.option("--walk-seed", type=int, default=None)
@click.option("--train-seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--deterministic/--nondeterministic", default=None)
@click.option("--dynamic-window/--fixed-window", default=None)
@click.option("--dump-walks", is_flag=True, default=False)
@click.pass_obj
@_command
def cmd_embed(cfg: RunConfig, input_path, out_dir, flatten_mode, dump_walks,
              **overrides):
    """Walk a graph (or flattened temporal store) and train embeddings."""
    cfg = cfg.updated(flatten=flatten_mode, **overrides)
    _echo_config(cfg)
    if os.path.isdir(input_path):
        tg = _load_temporal_store(input_path)
        mode, index = cfg.flatten_mode()
        graph = flatten(tg, mode, index)
    else:
        with open(input_path, "r", encoding="utf-8") as fp:
            graph = PropertyGraph.from_text(fp.read())

    corpus = generate_walks(graph, cfg.walk_config(), workers=cfg.workers)
    matrix = train(corpus, cfg.train_config())
    attach_labels(matrix, graph.labels())

    os.makedirs(out_dir, exist_ok=True)
    checkpoint = os.path.join(out_dir, "checkpoint.bin")
    matrix.save(checkpoint)
    export_projector(matrix, graph, out_dir)
    if dump_walks:
        atomic_write_text(os.path.join(out_dir, "walks.txt"), corpus.to_text())
    click.echo(f"vocabulary\t{len(matrix)}")
    click.echo(f"dimension\t{matrix.dimension}")
    if matrix.epoch_losses:
        click.echo(f"final_epoch_loss\t{matrix.epoch_losses[-1]:.6f}")
    click.echo(f"checkpoint\t{checkpoint}")


# ---------------------------------------------------------------------------
# query / predict
# ---------------------------------------------------------------------------

@main.command("query")
@click.argument("checkpoint", type=click.Path(exists=True))
@click.argument("node_id")
@click.option("-k", "k", type=int, default=10)
@click.option("--filter", "label_filter", multiple=True,
              help="Keep only nodes with one of these labels.")
@click.pass_obj
@_command
def cmd_query(cfg: RunConfig, checkpoint, node_id, k, label_filter):
    """Print the top-k most similar nodes."""
    _echo_config(cfg)
    matrix = EmbeddingMatrix.load(checkpoint)
    result = knn(matrix, node_id, k,
                 set(label_filter) if label_filter else None)
    for rank, (neighbor, similarity) in enumerate(result.neighbors, start=1):
        click.echo(f"{rank}\t{neighbor}\t{similarity:.6f}")


@main.command("predict")
@click.argument("checkpoint", type=click.Path(exists=True))
@click.argument("node_id")
@click.option("--labels", "labels_path", type=click.Path(exists=True),
              required=True, help="CSV of node_id,feedback training labels.")
@click.option("-k", "k", type=int, default=5)
@click.pass_obj
@_command
def cmd_predict(cfg: RunConfig, checkpoint, node_id, labels_path, k):
    """Predict a comfort label by majority vote of nearest labeled nodes."""
    _echo_config(cfg)
    matrix = EmbeddingMatrix.load(checkpoint)
    labeled = load_labeled_csv(labels_path)
    one_hot = predict_comfort(matrix, labeled, node_id, k)
    from .store import CLASS_NAMES, ONE_HOT_CLASSES

    name = CLASS_NAMES[ONE_HOT_CLASSES.index(one_hot)]
    click.echo(f"{list(one_hot)}\t{name}")


if __name__ == "__main__":
    main()
