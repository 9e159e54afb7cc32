"""Command-line interface for the zero-shot node classification pipeline."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import click
import numpy as np

from .checkpoint import (
    load_checkpoint,
    save_checkpoint,
    save_facet_cache,
)
from .config import TrainConfig, load_config
from .corpus import (
    DEFAULT_STOPWORDS,
    load_dataset,
    load_embedding_table,
    load_overlaps,
    save_overlaps,
    compute_overlaps,
)
from .facets import build_facet_tensor, compose_matrix, FacetTensor
from .kg import (
    build_topic_neighborhood,
    load_kg,
    load_neighborhoods,
    save_neighborhoods,
)
from .pipeline import (
    evaluate_accuracy,
    export_embeddings,
    featurize,
    objective_grad_check,
    predict,
    random_guess_predict,
    run_training,
)
from .recsys import recsys_evaluate
from .split import make_split
from .synth import synth_generate, toy_inputs

CONFIG_OPTION = click.option(
    "--config", "config_path", type=click.Path(exists=True), default=None,
    help="key=value config file overriding the defaults.",
)
SEED_OPTION = click.option(
    "--seed", type=int, default=None, help="Root random seed (overrides config)."
)


def _config_from(config_path: str | None, seed: int | None) -> TrainConfig:
    config = load_config(config_path) if config_path else TrainConfig()
    if seed is not None:
        config = config.replace(seed=seed)
    return config.validate()


def _stopwords_from(path: str | None) -> frozenset[str]:
    if path is None:
        return DEFAULT_STOPWORDS
    words = Path(path).read_text(encoding="utf-8").split()
    return frozenset(words)


def _load_inputs(dataset_dir: str, topics_path: str, emb_path: str, config: TrainConfig,
                 stopwords_path: str | None = None):
    dataset = load_dataset(
        Path(dataset_dir) / "nodes.tsv",
        Path(dataset_dir) / "edges.tsv",
        min_count=config.min_count,
        stopwords=_stopwords_from(stopwords_path),
    )
    neighborhoods = load_neighborhoods(topics_path)
    table = load_embedding_table(emb_path)
    if config.dim != table.dimension:
        config = config.replace(dim=table.dimension)
    return dataset, neighborhoods, table, config


@click.group()
def main():
    """Zero-shot node classification with knowledge-aware multi-faceted features."""


@main.group()
def topics():
    """Topic neighborhood construction."""


@topics.command("build")
@click.option("--kg", "kg_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True,
              help="File with one class label per line (defines class order).")
@click.option("--emb", "emb_path", type=click.Path(exists=True), required=True)
@click.option("-R", "--radius", type=int, default=2, show_default=True)
@click.option("-P", "--keep-percent", type=float, default=25.0, show_default=True)
@click.option("-o", "--out", "out_path", type=click.Path(), required=True)
def topics_build(kg_path, labels_path, emb_path, radius, keep_percent, out_path):
    """Extract a filtered topic neighborhood for every class label."""
    graph = load_kg(kg_path)
    table = load_embedding_table(emb_path)
    labels = [line.strip() for line in Path(labels_path).read_text(encoding="utf-8").splitlines() if line.strip()]
    neighborhoods = [
        build_topic_neighborhood(graph, label, radius, keep_percent, table)
        for label in labels
    ]
    save_neighborhoods(neighborhoods, out_path)
    total = sum(len(n) for n in neighborhoods)
    skipped = sum(n.skipped_missing for n in neighborhoods)
    click.echo(
        f"wrote {len(neighborhoods)} neighborhoods ({total} entries, "
        f"{skipped} unembedded concepts skipped) to {out_path}"
    )


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--topics", "topics_path", type=click.Path(exists=True), required=True)
@click.option("-o", "--out", "out_dir", type=click.Path(), required=True)
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True), default=None)
@CONFIG_OPTION
@SEED_OPTION
def prep(dataset_dir, topics_path, out_dir, stopwords_path, config_path, seed):
    """Tokenize node text and cache the per-node topic overlaps."""
    config = _config_from(config_path, seed)
    dataset = load_dataset(
        Path(dataset_dir) / "nodes.tsv",
        Path(dataset_dir) / "edges.tsv",
        min_count=config.min_count,
        stopwords=_stopwords_from(stopwords_path),
    )
    neighborhoods = load_neighborhoods(topics_path)
    alpha = config.attenuation if config.use_attenuation else 1.0
    overlaps = [compute_overlaps(node, neighborhoods, alpha) for node in dataset.nodes]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_overlaps(overlaps, out / "overlaps.jsonl")
    nonzero = sum(1 for o in overlaps if any(o.weight_sums.values()))
    click.echo(
        f"wrote overlaps for {len(overlaps)} nodes "
        f"({nonzero} with nonempty overlap) to {out / 'overlaps.jsonl'}"
    )


@main.command("facets")
@click.option("--overlaps", "overlaps_path", type=click.Path(exists=True), required=True,
              help="overlaps.jsonl file or the directory containing it.")
@click.option("--emb", "emb_path", type=click.Path(exists=True), required=True)
@click.option("-o", "--out", "out_dir", type=click.Path(), required=True)
@click.option("--tau", type=float, default=10.0, show_default=True)
@click.option("--alpha", type=float, default=0.8, show_default=True)
def facets_cmd(overlaps_path, emb_path, out_dir, tau, alpha):
    """Build facet tensors from cached overlaps and store them in binary form."""
    path = Path(overlaps_path)
    if path.is_dir():
        path = path / "overlaps.jsonl"
    overlaps = load_overlaps(path)
    if not overlaps:
        raise click.ClickException("no overlap records found")
    table = load_embedding_table(emb_path)
    class_order = list(overlaps[0].words.keys())
    tensors: list[FacetTensor] = [
        build_facet_tensor(overlap, class_order, alpha, table) for overlap in overlaps
    ]
    rows = np.stack([t.rows for t in tensors])
    sizes = np.stack([t.sizes for t in tensors])
    base, _ = compose_matrix(rows, sizes, tau)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_facet_cache(tensors, class_order, out / "facets.bin")
    with open(out / "base.tsv", "w", encoding="utf-8") as handle:
        for tensor, vector in zip(tensors, base):
            values = "\t".join(repr(float(v)) for v in vector)
            handle.write(f"{tensor.node_id}\t{values}\n")
    click.echo(
        f"wrote {len(tensors)} facet tensors ({len(class_order)} classes, "
        f"dim {table.dimension}) to {out / 'facets.bin'}"
    )


@main.command()
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--topics", "topics_path", type=click.Path(exists=True), required=True)
@click.option("--emb", "emb_path", type=click.Path(exists=True), required=True)
@click.option("-o", "--out", "out_path", type=click.Path(), required=True)
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="Write the per-epoch loss breakdown as JSON lines.")
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True), default=None)
@CONFIG_OPTION
@SEED_OPTION
def train(dataset_dir, topics_path, emb_path, out_path, log_path, stopwords_path,
          config_path, seed):
    """Train the gated message-passing model and save a checkpoint."""
    config = _config_from(config_path, seed)
    dataset, neighborhoods, table, config = _load_inputs(
        dataset_dir, topics_path, emb_path, config, stopwords_path
    )
    ck, breakdowns, split, _ = run_training(
        dataset, neighborhoods, table, config, log_path=log_path
    )
    save_checkpoint(ck, out_path)
    digest = hashlib.sha256(Path(out_path).read_bytes()).hexdigest()[:16]
    final = breakdowns[-1].total if breakdowns else float("nan")
    click.echo(
        f"trained {config.epochs} epochs on {len(split.train_nodes)} nodes "
        f"(seen {split.train_classes}, unseen {split.unseen}); "
        f"final loss {final:.6f}; checkpoint {out_path} sha256:{digest}"
    )


@main.command("eval")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--topics", "topics_path", type=click.Path(exists=True), required=True)
@click.option("--emb", "emb_path", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", "ck_path", type=click.Path(exists=True), required=True)
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True), default=None)
def eval_cmd(dataset_dir, topics_path, emb_path, ck_path, stopwords_path):
    """Zero-shot accuracy on the held-out classes, with a random baseline."""
    ck = load_checkpoint(ck_path)
    dataset, neighborhoods, table, config = _load_inputs(
        dataset_dir, topics_path, emb_path, ck.config, stopwords_path
    )
    feat = featurize(dataset, neighborhoods, table, config)
    split = make_split(
        feat.class_order, config.split_mode, config.split_ratios,
        config.seed, dataset.labels(), config.val_fraction,
    )
    predictions = predict(ck, feat, split.unseen)
    truth = dataset.labels()
    test_truth = {v: truth[v] for v in split.test_nodes}
    acc = evaluate_accuracy({v: predictions[v] for v in split.test_nodes}, test_truth)
    guesses = random_guess_predict(split.test_nodes, split.unseen, config.seed)
    baseline = evaluate_accuracy(guesses, test_truth)
    click.echo(json.dumps({
        "test_nodes": len(split.test_nodes),
        "unseen_classes": split.unseen,
        "accuracy": acc,
        "random_guess": baseline,
    }))


@main.command("predict")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--topics", "topics_path", type=click.Path(exists=True), required=True)
@click.option("--emb", "emb_path", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", "ck_path", type=click.Path(exists=True), required=True)
@click.option("-o", "--out", "out_path", type=click.Path(), required=True)
@click.option("--classes", "classes_text", type=str, default=None,
              help="Comma-separated target classes (default: the split's unseen set).")
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True), default=None)
def predict_cmd(dataset_dir, topics_path, emb_path, ck_path, out_path, classes_text,
                stopwords_path):
    """Write per-node predicted labels over the target classes."""
    ck = load_checkpoint(ck_path)
    dataset, neighborhoods, table, config = _load_inputs(
        dataset_dir, topics_path, emb_path, ck.config, stopwords_path
    )
    feat = featurize(dataset, neighborhoods, table, config)
    if classes_text:
        targets = [c.strip() for c in classes_text.split(",") if c.strip()]
    else:
        split = make_split(
            feat.class_order, config.split_mode, config.split_ratios,
            config.seed, dataset.labels(), config.val_fraction,
        )
        targets = split.unseen
    predictions = predict(ck, feat, targets)
    with open(out_path, "w", encoding="utf-8") as handle:
        for node_id in feat.node_ids:
            handle.write(f"{node_id}\t{predictions[node_id]}\n")
    click.echo(f"wrote {len(predictions)} predictions over {targets} to {out_path}")


@main.command("recsys")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--topics", "topics_path", type=click.Path(exists=True), required=True)
@click.option("--emb", "emb_path", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", "ck_path", type=click.Path(exists=True), required=True)
@click.option("--target-class", "target_class", type=str, required=True,
              help="Held-out class whose edges form the test set ('all' averages over classes).")
@click.option("--neg-test", type=int, default=100, show_default=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--neg-pool", type=click.Choice(["all", "target-class"]), default="all",
              show_default=True, help="Population the fake citations are drawn from.")
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True), default=None)
@SEED_OPTION
def recsys_cmd(dataset_dir, topics_path, emb_path, ck_path, target_class, neg_test, k,
               neg_pool, stopwords_path, seed):
    """Zero-shot link ranking: AUC, HR@K, and MRR@K for a target class."""
    ck = load_checkpoint(ck_path)
    dataset, neighborhoods, table, config = _load_inputs(
        dataset_dir, topics_path, emb_path, ck.config, stopwords_path
    )
    feat = featurize(dataset, neighborhoods, table, config)
    use_seed = seed if seed is not None else config.seed
    targets = feat.class_order if target_class == "all" else [target_class]
    results = {}
    for label in targets:
        metrics = recsys_evaluate(
            ck, feat, dataset.edges, label,
            neg_test=neg_test, k=k, seed=use_seed, neg_pool=neg_pool,
        )
        results[label] = {
            "auc": metrics.auc, "hr": metrics.hit_ratio, "mrr": metrics.mrr,
            "test_edges": metrics.num_test_edges,
        }
    if len(results) > 1:
        results["average"] = {
            key: float(np.mean([r[key] for r in results.values()]))
            for key in ("auc", "hr", "mrr")
        }
    click.echo(json.dumps(results))


@main.command("synth")
@click.option("-o", "--out", "out_dir", type=click.Path(), required=True)
@click.option("--classes", "num_classes", type=int, default=6, show_default=True)
@click.option("--nodes-per-class", type=int, default=100, show_default=True)
@click.option("--vocab-per-class", type=int, default=40, show_default=True)
@click.option("--noise", type=float, default=0.2, show_default=True)
@click.option("--intra", type=float, default=0.05, show_default=True)
@click.option("--inter", type=float, default=0.005, show_default=True)
@click.option("--dim", type=int, default=16, show_default=True)
@click.option("--tokens-per-node", type=int, default=25, show_default=True)
@click.option("--jitter", type=float, default=0.15, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def synth_cmd(out_dir, num_classes, nodes_per_class, vocab_per_class, noise, intra,
              inter, dim, tokens_per_node, jitter, seed):
    """Generate a planted-topic dataset, KG snapshot, and embedding table."""
    result = synth_generate(
        out_dir, num_classes, nodes_per_class, vocab_per_class, noise,
        intra, inter, dim, seed, tokens_per_node=tokens_per_node, jitter=jitter,
    )
    click.echo(
        f"wrote {result.num_nodes} nodes, {result.num_edges} edges, "
        f"{len(result.classes)} classes to {result.out_dir}"
    )


@main.command("export-emb")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True), required=True)
@click.option("--topics", "topics_path", type=click.Path(exists=True), required=True)
@click.option("--emb", "emb_path", type=click.Path(exists=True), required=True)
@click.option("--checkpoint", "ck_path", type=click.Path(exists=True), required=True)
@click.option("-o", "--out", "out_path", type=click.Path(), required=True)
@click.option("--stopwords", "stopwords_path", type=click.Path(exists=True), default=None)
def export_emb(dataset_dir, topics_path, emb_path, ck_path, out_path, stopwords_path):
    """Dump final node representations for offline visualization."""
    ck = load_checkpoint(ck_path)
    dataset, neighborhoods, table, config = _load_inputs(
        dataset_dir, topics_path, emb_path, ck.config, stopwords_path
    )
    feat = featurize(dataset, neighborhoods, table, config)
    count = export_embeddings(ck, feat, out_path)
    click.echo(f"wrote {count} embeddings of dim {feat.dim} to {out_path}")


@main.command("gradcheck")
@SEED_OPTION
@click.option("--eps", type=float, default=1e-5, show_default=True)
def gradcheck_cmd(seed, eps):
    """Verify analytic gradients of the full objective on a tiny fixture."""
    use_seed = seed if seed is not None else 0
    dataset, neighborhoods, table, _ = _toy_setup(use_seed)
    config = _toy_config(use_seed, table.dimension)
    error = objective_grad_check(dataset, neighborhoods, table, config, eps=eps)
    status = "ok" if error < 1e-4 else "FAIL"
    click.echo(f"max relative gradient error: {error:.3e} [{status}]")
    if error >= 1e-4:
        raise SystemExit(1)


def _toy_setup(seed: int):
    dataset, neighborhoods, table = toy_inputs(seed=seed)
    return dataset, neighborhoods, table, None


def _toy_config(seed: int, dim: int) -> TrainConfig:
    return TrainConfig(
        radius=1, keep_percent=100.0, dim=dim, layers=2, negatives=2,
        contrastive_weight=0.5, geometric_weight=0.5, min_count=0,
        split_mode="I", split_train=2, split_val=0, split_test=1, seed=seed,
    )


if __name__ == "__main__":
    main()
