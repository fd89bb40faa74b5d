#!/usr/bin/env python3
"""
Command Line Interface for TetMesh DB
Batch front end over workspaces: load, validate, index, partition, scatter/gather, attributes
"""

import functools
import os
import sys
from typing import List, Optional

import click

from core.attributes import (
    AttributeBinding,
    CoordinateSystem,
    MeshEntityKind,
    TopoEntity,
    TopoKind,
)
from core.bundles import RESULTS_FILE, gather, scatter
from core.config import ConfigManager, configure_logging
from core.errors import DivergenceError, InvalidQueryError, MeshDBError
from core.mesh import RepresentationMode, validate_mesh
from core.partition import balance_report, bootstrap_groups, compute_halos, rcb, refine
from core.spatial_index import IntervalIndex, QueryPoint, SpatialIndex, point_locate
from core.tabular import INCIDENCE_SCHEMA, CheckMode, TableKind, incidence_rows, load_mesh, read_tabular
from core.views import (
    RepresentationPolicy,
    apply_policy,
    element_adjacency_graph,
    to_normalized,
    to_quadruple,
)
from core.workspace import Workspace
from utils.cube_mesh import generate_cube_mesh
from utils.size_estimator import SizeEstimator, SolutionSizeQuery

RESET_STAGES = ("validated", "indexed", "partitioned", "scattered", "gathered")


def _quote(value) -> str:
    text = str(value)
    return f'"{text}"' if " " in text else text


class MeshCLI(click.Group):
    """Click group with the tool's exit codes: 1 for usage and IO errors, 2 for findings"""

    def main(self, *args, **kwargs):
        standalone = kwargs.pop("standalone_mode", True)
        try:
            rv = super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(1)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)
        if not standalone:
            return rv
        sys.exit(rv if isinstance(rv, int) else 0)

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except MeshDBError as e:
            record = " ".join(f"{k}={_quote(v)}" for k, v in e.to_record().items())
            # Findings are part of the report; operational failures are diagnostics
            click.echo(record, err=e.exit_code != 2)
            sys.exit(e.exit_code)


def engine_options(func):
    """--config and --verbose, loading settings and logging before the command runs"""
    @click.option('--config', '-c', 'config_file', default='.env', help='Configuration file path')
    @click.option('--verbose', '-v', is_flag=True, help='Verbose output')
    @functools.wraps(func)
    def wrapper(*args, config_file, verbose, **kwargs):
        config_manager = ConfigManager(config_file)
        valid, message = config_manager.validate_config()
        configure_logging("DEBUG" if verbose else config_manager.get_value('log_level', 'INFO'))
        if not valid:
            click.echo(f"Invalid configuration in {config_file}: {message}", err=True)
            sys.exit(1)
        return func(*args, settings=config_manager, **kwargs)
    return wrapper


workspace_option = click.option('--workspace', '-w', default='.', type=click.Path(file_okay=False),
                                help='Workspace directory')


def _echo_lines(lines: List[str]):
    for line in lines:
        click.echo(line)


def _policy(settings: ConfigManager) -> RepresentationPolicy:
    return RepresentationPolicy.from_setting(settings.get_value('representation_mode'),
                                             settings.get_int('dual_threshold'))


@click.group(cls=MeshCLI)
@click.version_option(version="1.0.0")
def cli():
    """TetMesh DB - data management for tetrahedral finite-element meshes"""
    pass


@cli.command('gen-cube')
@click.option('--n', 'n', type=int, required=True, help='Cells per axis')
@click.option('--out', '-o', required=True, type=click.Path(file_okay=False), help='Workspace to create')
@engine_options
def gen_cube(n, out, settings):
    """Create a workspace holding the unit-cube fixture mesh"""
    if n < 1:
        raise click.BadParameter("must be at least 1", param_hint="--n")
    workspace = Workspace.create(out)
    with workspace.lock():
        m = generate_cube_mesh(n)
        apply_policy(m, _policy(settings))
        for stage in RESET_STAGES:
            workspace.mark(stage, False)
        workspace.set("mesh", "policy", settings.get_value('representation_mode'))
        workspace.save_mesh(m)
    click.echo(f"workspace={out} vertices={m.vertex_count} elements={m.element_count} mode={m.mode.value}")


@cli.command()
@click.option('--vertices', required=True, type=click.Path(exists=True, dir_okay=False), help='Vertex table file')
@click.option('--elements', required=True, type=click.Path(exists=True, dir_okay=False), help='Element table file')
@click.option('--check', type=click.Choice(['deferred', 'immediate']), default=None,
              help='Constraint checking mode (default from configuration)')
@workspace_option
@engine_options
def load(vertices, elements, check, workspace, settings):
    """Bulk load vertex and element tables into a workspace"""
    check_mode = CheckMode(check or settings.get_value('check_mode'))
    ws = Workspace.create(workspace)
    with ws.lock():
        m, reports = load_mesh(vertices, elements, check_mode)
        apply_policy(m, _policy(settings))
        for stage in RESET_STAGES:
            ws.mark(stage, False)
        ws.set("mesh", "policy", settings.get_value('representation_mode'))
        ws.save_mesh(m)

    for report in reports:
        _echo_lines(report.lines())
    found = sum(len(r.violations) for r in reports)
    click.echo(f"vertices={m.vertex_count} elements={m.element_count} violations={found}")
    if found:
        sys.exit(2)


@cli.command()
@workspace_option
@engine_options
def validate(workspace, settings):
    """Check every integrity constraint of the workspace mesh"""
    ws = Workspace.open(workspace)
    m = ws.load_mesh()
    report = validate_mesh(m, settings.get_float('geometric_tolerance'))
    _echo_lines(report.lines())
    click.echo(f"violations={len(report.violations)} warnings={len(report.warnings)}")
    with ws.lock():
        ws.mark("validated", report.is_clean)
        ws.save_manifest()
    if not report.is_clean:
        sys.exit(2)


@cli.command()
@click.option('--drop-quadruple', is_flag=True, help='Keep only the normalized table')
@workspace_option
@engine_options
def normalize(drop_quadruple, workspace, settings):
    """Materialize the normalized incidence table and verify the round trip"""
    ws = Workspace.open(workspace)
    with ws.lock():
        m = ws.load_mesh()
        elements = sorted(m.iter_elements(), key=lambda t: t.id)
        rows = to_normalized(elements)
        if to_quadruple(rows) != elements:
            raise DivergenceError("normalized rows do not rebuild the element table")
        m.set_mode(RepresentationMode.NORMALIZED if drop_quadruple else RepresentationMode.DUAL)
        ws.save_mesh(m)
    click.echo(f"mode={m.mode.value} elements={len(elements)} incidence_rows={len(rows)} round_trip=ok")


@cli.command()
@workspace_option
@engine_options
def denormalize(workspace, settings):
    """Rebuild quadruples from the normalized table and drop it"""
    ws = Workspace.open(workspace)
    incidence_path = str(ws.table_path(TableKind.INCIDENCE))
    if not os.path.exists(incidence_path):
        raise InvalidQueryError("workspace has no normalized table; run normalize first")
    with ws.lock():
        m = ws.load_mesh()
        rebuilt = to_quadruple(incidence_rows(read_tabular(incidence_path, INCIDENCE_SCHEMA)))
        stored = sorted(m.iter_elements(), key=lambda t: t.id)
        if rebuilt != stored:
            raise DivergenceError("normalized table disagrees with the element table")
        m.set_mode(RepresentationMode.QUADRUPLE)
        ws.save_mesh(m)
    click.echo(f"mode={m.mode.value} elements={len(rebuilt)} round_trip=ok")


@cli.group()
def index():
    """Cell table and spatial index"""
    pass


@index.command('build')
@click.option('--bits', type=int, default=None, help='Bits per axis of the surrogate-key grid')
@workspace_option
@engine_options
def index_build(bits, workspace, settings):
    """Build the cell table and interval index"""
    bits = bits or settings.get_int('morton_bits')
    ws = Workspace.open(workspace)
    with ws.lock():
        m = ws.load_mesh()
        m.cells = None
        spatial = SpatialIndex(m, bits)
        ws.set("index", "morton_bits", bits)
        ws.mark("indexed")
        ws.save_mesh(m)
    click.echo(f"cells={len(spatial.cells)} index_entries={len(spatial.index)} bits={bits} "
               f"resolution={spatial.grid.resolution}")


@cli.command()
@click.option('--point', '-p', required=True, help='Query point as x,y,z')
@workspace_option
@engine_options
def locate(point, workspace, settings):
    """Elements containing a point, one id per line"""
    p = QueryPoint.parse(point)
    ws = Workspace.open(workspace)
    m = ws.load_mesh()
    if m.cells is None:
        raise InvalidQueryError("workspace has no cell table; run index build first")
    found = point_locate(p, m, IntervalIndex.build(m.cells))
    for elem_id in sorted(found):
        click.echo(str(elem_id))


@cli.command()
@click.option('--bootstrap', '-b', type=int, default=None, help='Bootstrap partition count (power of two)')
@click.option('--refine', '-n', 'target', type=int, default=None, help='Refined partition count')
@click.option('--imbalance', type=float, default=None, help='Largest partition over average')
@click.option('--passes', type=int, default=None, help='Refinement pass limit')
@workspace_option
@engine_options
def partition(bootstrap, target, imbalance, passes, workspace, settings):
    """Bootstrap by coordinate bisection, then refine on the element graph"""
    bootstrap = bootstrap or settings.get_int('bootstrap_partitions')
    target = target or bootstrap
    imbalance = imbalance or settings.get_float('imbalance')
    passes = passes or settings.get_int('refine_passes')

    ws = Workspace.open(workspace)
    with ws.lock():
        m = ws.load_mesh()
        graph = element_adjacency_graph(m)
        boot = rcb(m, bootstrap)
        boot_report = balance_report(graph, boot)
        refined = refine(graph, boot, target, imbalance, passes)
        report = balance_report(graph, refined)
        ws.mark("scattered", False)
        ws.save_partition(refined, edge_cut=report.edge_cut, bootstrap=bootstrap)

    _echo_lines(boot_report.lines()[:1])
    _echo_lines(report.lines())
    for ancestor, parts in sorted(bootstrap_groups(refined).items()):
        click.echo(f"group bootstrap={ancestor} partitions={','.join(str(p) for p in parts)}")


@cli.command('scatter')
@click.option('--out', '-o', required=True, type=click.Path(file_okay=False), help='Bundle destination directory')
@workspace_option
@engine_options
def scatter_cmd(out, workspace, settings):
    """Write one bundle per partition"""
    ws = Workspace.open(workspace)
    with ws.lock():
        m = ws.load_mesh()
        pm = ws.load_partition()
        halos = compute_halos(m, pm)
        store = ws.load_attributes() if os.path.exists(ws.path("attributes.json")) else None
        paths = scatter(m, pm, halos, out, store)
        ws.mark("scattered")
        ws.save_manifest()

    for part, path in enumerate(paths):
        halo = halos[part]
        click.echo(f"bundle={path} partition={part} elements={len(halo.owned)} "
                   f"vertices={len(halo.required)} ghosts={len(halo.ghosts)}")


@cli.command('gather')
@click.option('--in', '-i', 'source', required=True, type=click.Path(exists=True, file_okay=False),
              help='Directory of result bundles')
@click.option('--loaders', type=int, default=None, help='Concurrent loads (default from configuration)')
@workspace_option
@engine_options
def gather_cmd(source, loaders, workspace, settings):
    """Stage result bundles and load them into the workspace result table"""
    loaders = loaders or settings.get_int('loader_concurrency')
    bundle_dirs = sorted(os.path.join(source, d) for d in os.listdir(source)
                         if os.path.isfile(os.path.join(source, d, RESULTS_FILE)))
    ws = Workspace.open(workspace)
    with ws.lock():
        frame = gather(bundle_dirs, str(ws.path("staging")), loaders)
        ws.save_results(frame, len(bundle_dirs))
    click.echo(f"rows={len(frame)} bundles={len(bundle_dirs)} loaders={loaders}")


# ------------------------------------------------------------------ attributes

@cli.group()
def attr():
    """Topology, classification and attribute bindings"""
    pass


def _ids(text: Optional[str]) -> Optional[List[int]]:
    if not text:
        return None
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidQueryError(f"bad id list {text!r}")


@attr.command('topo-add')
@click.option('--kind', type=click.Choice([k.value for k in TopoKind]), required=True, help='Entity kind')
@click.option('--id', 'entity_id', type=int, required=True, help='Entity id')
@click.option('--boundary', default=None, help='Comma-separated ids of the next lower kind')
@workspace_option
@engine_options
def attr_topo_add(kind, entity_id, boundary, workspace, settings):
    """Add a topology entity"""
    ws = Workspace.open(workspace)
    with ws.lock():
        store = ws.load_attributes()
        entity = store.topology.add(TopoKind(kind), entity_id, _ids(boundary) or [])
        ws.save_attributes(store)
    click.echo(f"entity={entity}")


@attr.command('classify')
@click.option('--region', type=int, default=None, help='Region receiving the elements')
@click.option('--elements', default=None, help='Comma-separated element ids (default: all)')
@click.option('--vertex', type=int, default=None, help='Vertex to classify')
@click.option('--entity', default=None, help='Target of --vertex, as kind:id')
@workspace_option
@engine_options
def attr_classify(region, elements, vertex, entity, workspace, settings):
    """Classify elements onto a region or a vertex onto any entity"""
    if (region is None) == (vertex is None):
        raise click.UsageError("give either --region or --vertex")
    ws = Workspace.open(workspace)
    with ws.lock():
        store = ws.load_attributes()
        if region is not None:
            ids = _ids(elements)
            if ids is None:
                ids = list(ws.load_mesh().element_ids)
            for elem_id in ids:
                store.classification.classify_element(elem_id, region)
            click.echo(f"classified={len(ids)} target=region:{region}")
        else:
            if not entity:
                raise click.UsageError("--vertex needs --entity")
            target = TopoEntity.parse(entity)
            store.classification.classify_vertex(vertex, target)
            click.echo(f"classified=1 target={target}")
        ws.save_attributes(store)


def _parse_value(kind: str, text: str):
    if kind == "expression":
        return text
    try:
        if kind == "vector":
            return tuple(float(v) for v in text.replace(";", ",").split(","))
        return float(text)
    except ValueError:
        raise InvalidQueryError(f"bad {kind} value {text!r}")


@attr.command('assign')
@click.option('--entity', required=True, help='Topology entity as kind:id')
@click.option('--name', required=True, help='Attribute name')
@click.option('--value', required=True, help='Scalar, comma-separated vector, or expression text')
@click.option('--kind', type=click.Choice(['scalar', 'vector', 'expression']), default='scalar', help='Value kind')
@click.option('--context', type=click.Choice([c.value for c in CoordinateSystem]), default='cartesian',
              help='Coordinate system the value is expressed in')
@click.option('--scope', default='region', help='Comma-separated kinds the binding applies to')
@click.option('--group', default=None, help='Attribute group id')
@click.option('--time-dependent', is_flag=True, help='Mark the attribute as time dependent')
@workspace_option
@engine_options
def attr_assign(entity, name, value, kind, context, scope, group, time_dependent, workspace, settings):
    """Bind an attribute to a topology entity"""
    try:
        scope_kinds = frozenset(TopoKind(s.strip()) for s in scope.split(",") if s.strip())
    except ValueError:
        raise InvalidQueryError(f"bad scope {scope!r}")
    target = TopoEntity.parse(entity)
    binding = AttributeBinding(name, _parse_value(kind, value), CoordinateSystem(context),
                               scope_kinds, group, time_dependent)
    ws = Workspace.open(workspace)
    with ws.lock():
        store = ws.load_attributes()
        store.assign(target, binding)
        ws.save_attributes(store)
    click.echo(f"assigned={name} entity={target} kind={binding.kind.value}")


@attr.command('resolve')
@click.option('--name', default=None, help='Attribute name (default: every name, with --all)')
@click.option('--element', type=int, default=None, help='Element to resolve for')
@click.option('--vertex', type=int, default=None, help='Vertex to resolve for')
@click.option('--all', 'all_elements', is_flag=True, help='Resolve for every classified element')
@workspace_option
@engine_options
def attr_resolve(name, element, vertex, all_elements, workspace, settings):
    """Resolve attributes through classification and inheritance"""
    ws = Workspace.open(workspace)
    store = ws.load_attributes()

    if all_elements:
        ids = list(ws.load_mesh().element_ids)
        table = store.resolve_all(ids, [name] if name else None)
        for _, row in table.to_frame().iterrows():
            click.echo(" ".join(f"{k}={_quote(v)}" for k, v in row.items()))
        _echo_lines(table.report_lines())
        click.echo(f"resolved={len(table.rows)} unresolved={len(table.unresolved)}")
        if table.unresolved:
            sys.exit(2)
        return

    if name is None or (element is None) == (vertex is None):
        raise click.UsageError("give --name and exactly one of --element, --vertex (or use --all)")
    kind = MeshEntityKind.ELEMENT if element is not None else MeshEntityKind.VERTEX
    resolved = store.resolve(kind, element if element is not None else vertex, name)
    click.echo(f"name={resolved.name} value={_quote(resolved.value)} kind={resolved.kind.value} "
               f"context={resolved.context.value} source={resolved.provenance} distance={resolved.distance}")


@attr.command('group')
@click.argument('group')
@workspace_option
@engine_options
def attr_group(group, workspace, settings):
    """List the bindings of an attribute group"""
    store = Workspace.open(workspace).load_attributes()
    for entity, name in store.group_members(group):
        click.echo(f"group={group} entity={entity} name={name}")


# ------------------------------------------------------------------ reports

@cli.command('estimate-size')
@click.option('--N', 'elements', type=int, required=True, help='Element count')
@click.option('--S', 'states', type=int, required=True, help='State variables per Gauss point')
@click.option('--G', 'gauss_points', type=int, required=True, help='Gauss points per element')
@click.option('--T', 'samples', type=int, required=True, help='Time samples')
@click.option('--vertices', type=int, default=None, help='Vertex count, to include the mesh tables')
@click.option('--report', is_flag=True, help='Print the breakdown as key=value lines')
@click.option('--readable', is_flag=True, help='Print the formatted text report')
@engine_options
def estimate_size(elements, states, gauss_points, samples, vertices, report, readable, settings):
    """Bytes of solver output: T*N*S*G doubles"""
    estimator = SizeEstimator()
    estimate = estimator.estimate(SolutionSizeQuery(elements, states, gauss_points, samples), vertices)
    if readable:
        click.echo(estimator.generate_estimate_report(estimate))
    elif report:
        _echo_lines(estimator.report_lines(estimate))
    else:
        click.echo(str(estimate['bytes']))


@cli.command()
@workspace_option
@engine_options
def info(workspace, settings):
    """Print the workspace manifest and check it against the files"""
    ws = Workspace.open(workspace)
    _echo_lines(ws.info_lines())
    problems = ws.verify()
    for problem in problems:
        click.echo(f"problem {problem}")
    if problems:
        sys.exit(2)


if __name__ == '__main__':
    cli()
