"""
Comando: python manage.py netstab <verbo> ...

Verbos:
  analyze FILE            ρ de la matriz de estabilidad y veredicto (JSON)
  graph FILE              grafo de interacciones en DOT
  sets FILE               conjuntos estructurales completos (--basic marca los básicos)
  restrict/expand FILE    transformaciones respecto de --set v2,v4
  undelay/dedelay FILE    quitar retardos / red aumentada sin retardos
  simulate FILE           veredicto empírico de atracción (JSON) y órbita (CSV)
  compare FILE            ρ de original, sin retardos, restricción y expansión
  jacobian FILE           ρ local en un punto fijo hallado por iteración
  verify-paper            regresiones de los ejemplos con forma cerrada

Códigos de salida: 0 éxito, 1 error de dominio, 2 error de uso.

Uso:
  python manage.py netstab analyze netstab/data/examples/ex4.net -o ex4.json
  python manage.py netstab sets --basic netstab/data/examples/ex6.net
  python manage.py netstab expand netstab/data/examples/ex5.net --set v2,v4 -o ex5_x.net
"""
from __future__ import annotations

import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from tqdm import tqdm

from netstab.cli import emit_dot
from netstab.services.delays import dedelay, undelay
from netstab.services.errors import NetstabError
from netstab.services.expr import Interval
from netstab.services.network import format_network_file, interaction_graph, parse_network_file
from netstab.services.worked_examples import iter_regressions
from netstab.services.reports import (
    JacobianModel,
    attraction_model,
    comparison_model,
    regressions_model,
    stability_model,
    structural_sets_model,
)
from netstab.services.sim import find_fixed_point, iterate_orbit, random_history, verify_global_attraction
from netstab.services.stability import analyze, compare, jacobian_at
from netstab.services.spectral import signed_spectral_radius
from netstab.services.structural import find_structural_sets
from netstab.services.transform import expand, restrict

logger = logging.getLogger(__name__)

TRANSFORM_VERBS = ("restrict", "expand", "undelay", "dedelay")


def _parse_set(raw):
    return tuple(part.strip() for part in (raw or "").split(",") if part.strip())


def _parse_floats(raw):
    try:
        return [float(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise CommandError(f"lista de números inválida: {raw!r}", returncode=2) from None


class Command(BaseCommand):
    help = "Análisis de estabilidad de redes dinámicas con retardos."
    requires_system_checks = []

    def add_arguments(self, parser):
        verbs = parser.add_subparsers(dest="verb", required=True, metavar="verbo")

        sub = verbs.add_parser("analyze", help="ρ y veredicto; escribe el StabilityReport en JSON.")
        self._add_input(sub)
        self._add_output(sub, "JSON del reporte (por defecto <red>.report.json).")

        sub = verbs.add_parser("graph", help="Grafo de interacciones en DOT.")
        self._add_input(sub)
        sub.add_argument("--set", dest="structural_set", default="", help="Vértices a resaltar, separados por coma.")
        sub.add_argument("--dedelay", action="store_true", help="Dibuja el grafo de la red de-retardada.")
        self._add_output(sub, "Archivo DOT (por defecto stdout).")

        sub = verbs.add_parser("sets", help="Lista conjuntos estructurales completos.")
        self._add_input(sub)
        sub.add_argument("--basic", action="store_true", help="Marca cuáles son básicos.")
        sub.add_argument("--only-basic", action="store_true", help="Solo conjuntos básicos.")
        sub.add_argument("--max-results", type=int, default=100, help="Máximo de conjuntos listados.")
        self._add_output(sub, "JSON de los conjuntos (por defecto <red>.sets.json).")

        for verb in TRANSFORM_VERBS:
            sub = verbs.add_parser(verb, help=f"Escribe la red transformada por {verb}.")
            self._add_input(sub)
            sub.add_argument("--set", dest="structural_set", default="", help="Conjunto estructural, p.ej. v2,v4.")
            self._add_output(sub, "Archivo de red (por defecto stdout).")

        sub = verbs.add_parser("simulate", help="Veredicto empírico de atracción global.")
        self._add_input(sub)
        sub.add_argument("--trials", type=int, default=20)
        sub.add_argument("--steps", type=int, default=5000)
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--tol", type=float, default=1e-6)
        sub.add_argument("--box", type=float, default=None, help="Semiancho de la caja de muestreo.")
        sub.add_argument("--csv", default=None, help="CSV de una órbita con la misma semilla (por defecto <red>.csv).")
        self._add_output(sub, "JSON del veredicto (por defecto <red>.attraction.json).")

        sub = verbs.add_parser("compare", help="ρ de la red, sin retardos, restricción y expansión.")
        self._add_input(sub)
        sub.add_argument("--set", dest="structural_set", default="")
        self._add_output(sub, "JSON de la comparación (por defecto <red>.compare.json).")

        sub = verbs.add_parser("jacobian", help="ρ del jacobiano en un punto fijo.")
        self._add_input(sub)
        sub.add_argument("--guess", default=None, help="Punto inicial, p.ej. 0,0.")
        sub.add_argument("--tol", type=float, default=1e-10)
        self._add_output(sub, "JSON del jacobiano (por defecto <red>.jacobian.json).")

        sub = verbs.add_parser("verify-paper", help="Regresiones de los ejemplos 1-7.")
        sub.add_argument("--no-progress", action="store_true", help="Sin barra de progreso.")
        sub.add_argument("-o", "--output", default=None, help="JSON con la tabla de resultados.")

    @staticmethod
    def _add_input(sub):
        sub.add_argument("network_file", help="Archivo de red (.net).")

    @staticmethod
    def _add_output(sub, help_text):
        sub.add_argument("-o", "--output", default=None, help=help_text)

    def handle(self, *args, **options):
        verb = options["verb"]
        handler = getattr(self, "_handle_" + verb.replace("-", "_"), None) or self._handle_transform
        logger.info("netstab %s inicio", verb)
        try:
            handler(options)
        except NetstabError as exc:
            logger.warning("netstab %s fallido error=%s", verb, exc)
            raise CommandError(str(exc), returncode=1) from exc
        logger.info("netstab %s fin", verb)

    # ------------------------------------------------------------------
    # entrada / salida
    # ------------------------------------------------------------------

    def _load(self, options):
        path = Path(options["network_file"])
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CommandError(f"no se pudo leer {path}: {exc.strerror or exc}", returncode=2) from None
        return parse_network_file(text)

    def _write_text(self, target, text):
        """Escribe en `target`, o en stdout si es None o "-"."""
        if target in (None, "-"):
            self.stdout.write(text, ending="" if text.endswith("\n") else "\n")
            return
        try:
            Path(target).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CommandError(f"no se pudo escribir {target}: {exc.strerror or exc}", returncode=1) from None

    def _write_report(self, options, suffix, model):
        target = options.get("output")
        if target is None:
            target = str(Path(options["network_file"]).with_suffix(f".{suffix}.json"))
        self._write_text(target, model.to_json() + "\n")
        if target != "-":
            self.stdout.write(f"reporte escrito en {target}")

    def _structural_set(self, options, required):
        members = _parse_set(options.get("structural_set"))
        if required and not members:
            raise CommandError(f"{options['verb']} necesita --set v1,v2,...", returncode=2)
        return members

    # ------------------------------------------------------------------
    # verbos
    # ------------------------------------------------------------------

    def _handle_analyze(self, options):
        net = self._load(options)
        report = analyze(net)
        line = f"rho = {report.rho:.10g} verdict = {report.verdict}"
        if report.boundary:
            line += " (frontera)"
        self.stdout.write(line)
        if report.cohen_grossberg_bound is not None:
            self.stdout.write(f"cohen-grossberg bound = {report.cohen_grossberg_bound:.10g}")
        self._write_report(options, "report", stability_model(report))

    def _handle_graph(self, options):
        net = self._load(options)
        members = self._structural_set(options, required=False)
        if options.get("dedelay"):
            net = dedelay(net).network
        self._write_text(options.get("output"), emit_dot(interaction_graph(net), members, name=net.name))

    def _handle_sets(self, options):
        net = self._load(options)
        reports = find_structural_sets(
            interaction_graph(net),
            want_basic=options["only_basic"],
            max_results=options["max_results"],
        )
        if not reports:
            self.stdout.write(self.style.WARNING("No se encontraron conjuntos estructurales."))
        for report in reports:
            line = "{" + ",".join(report.structural_set) + "} complete"
            if options["basic"] or options["only_basic"]:
                line += " basic" if report.basic else " non-basic"
            self.stdout.write(line)
        self._write_report(options, "sets", structural_sets_model(net.name, reports))

    def _handle_transform(self, options):
        verb = options["verb"]
        net = self._load(options)
        if verb == "undelay":
            result = undelay(net)
        elif verb == "dedelay":
            result = dedelay(net).network
        elif verb == "restrict":
            result = restrict(net, self._structural_set(options, required=True))
        else:
            result = expand(net, self._structural_set(options, required=True)).network
        self._write_text(options.get("output"), format_network_file(result))
        if options.get("output") not in (None, "-"):
            self.stdout.write(self.style.SUCCESS(f"{verb}: {result.name} n={result.size} escrito en {options['output']}"))

    def _handle_simulate(self, options):
        net = self._load(options)
        if options["trials"] < 2 or options["steps"] < 1:
            raise CommandError("--trials >= 2 y --steps >= 1", returncode=2)
        sample_box = None
        if options["box"] is not None:
            sample_box = Interval(-abs(options["box"]), abs(options["box"]))
        verdict = verify_global_attraction(
            net,
            trials=options["trials"],
            steps=options["steps"],
            sample_box=sample_box,
            tol=options["tol"],
            seed=options["seed"],
        )
        status = "yes" if verdict.converged else "no"
        self.stdout.write(
            f"converged = {status} diameter = {verdict.final_diameter:.3g} iterations = {verdict.iterations_used}"
        )
        if verdict.witness is not None:
            self.stdout.write("witness = (" + ", ".join(f"{v:.10g}" for v in verdict.witness) + ")")
        self._write_report(options, "attraction", attraction_model(net.name, verdict))
        csv_path = options["csv"] or str(Path(options["network_file"]).with_suffix(".csv"))
        history = random_history(net, seed=options["seed"], sample_box=sample_box)
        trajectory = iterate_orbit(net, history, options["steps"])
        try:
            with open(csv_path, "w", encoding="utf-8", newline="") as stream:
                trajectory.write_csv(stream)
        except OSError as exc:
            raise CommandError(f"no se pudo escribir {csv_path}: {exc.strerror or exc}", returncode=1) from None
        self.stdout.write(f"órbita escrita en {csv_path}")

    def _handle_compare(self, options):
        net = self._load(options)
        members = self._structural_set(options, required=False)
        reports = compare(net, members or None)
        for key, report in reports.items():
            self.stdout.write(f"{key:<12} rho = {report.rho:.10g} verdict = {report.verdict}")
        self._write_report(options, "compare", comparison_model(net.name, reports, members))

    def _handle_jacobian(self, options):
        net = self._load(options)
        guess = _parse_floats(options["guess"]) if options.get("guess") else None
        point = find_fixed_point(net, guess=guess, tol=options["tol"])
        labels, jacobian = jacobian_at(net, list(point))
        rho = signed_spectral_radius(jacobian)
        kind = "repelling" if rho > 1.0 else "attracting" if rho < 1.0 else "neutral"
        self.stdout.write("fixed point = (" + ", ".join(f"{v:.10g}" for v in point) + ")")
        self.stdout.write(f"local rho = {rho:.10g} ({kind})")
        model = JacobianModel(
            network=net.name,
            fixed_point=[float(v) for v in point],
            indices=list(labels),
            jacobian=jacobian.tolist(),
            rho=rho,
        )
        self._write_report(options, "jacobian", model)

    def _handle_verify_paper(self, options):
        checks = []
        progress = tqdm(
            iter_regressions(),
            desc="verify-paper",
            unit="check",
            disable=True if options.get("no_progress") else None,
        )
        for check in progress:
            checks.append(check)
        self.stdout.write(f"{'status':<6}  {'expected':>14}  {'observed':>14}  check")
        for check in checks:
            mark = "PASS" if check.passed else "FAIL"
            line = f"{mark:<6}  {check.expected:>14.10g}  {check.observed:>14.10g}  {check.name}"
            self.stdout.write(line if check.passed else self.style.ERROR(line))
        passed = sum(check.passed for check in checks)
        if options.get("output"):
            self._write_text(options["output"], regressions_model(checks).to_json() + "\n")
        if passed != len(checks):
            raise CommandError(f"fallaron {len(checks) - passed} de {len(checks)} regresiones", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"{passed}/{len(checks)} regresiones correctas"))
