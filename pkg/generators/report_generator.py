"""
Report Generator Module

Responsible for:
1. JSON analysis reports, validated against config/report_schema.json
2. Figure data: the a0 factor grid and the per-model diagnostic scatter
3. An optional styled workbook (Models, Best Model, Audit sheets)

Design Decisions:
1. JSON output carries no timestamps or run-dependent values, so the same
   inputs and seed give byte-identical files
2. Undefined ratios are null in JSON and empty fields in CSV
3. Figures are data only; plotting is left to the consumer
4. openpyxl for full workbook formatting control
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from jsonschema import Draft202012Validator
from openpyxl import Workbook
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from config.settings import SCHEMA_VERSION, Settings
from models.errors import ReportError
from models.report import AnalysisReport, BatchReport, ModelRow
from models.inference import as_optional
from scoring.marginal_likelihood import a0_factor_grid
from utils.helpers import AuditTrail

logger = logging.getLogger(__name__)

Report = Union[AnalysisReport, BatchReport]

MODEL_COLUMNS = [
    ('Rank', 8), ('Model', 14), ('Characteristics', 40), ('Posterior', 12),
    ('log marginal', 14), ('RR', 10), ('PC lower bound', 16),
    ('Treated ratio', 14), ('Untreated E ratio', 18),
]


def _cell_value(value: Any) -> Any:
    return "" if value is None else value


class ReportGenerator:
    """
    Serialises analysis results.

    Usage:
        generator = ReportGenerator(settings)
        generator.write_json(report, "report.json")
        generator.write_workbook(report, audit, "report.xlsx")
    """

    def __init__(self, settings: Settings):
        self.settings = settings
        self._validator: Optional[Draft202012Validator] = None

        # Styling
        colors = settings.report
        self.header_fill = PatternFill(
            start_color=colors.header_bg_color, end_color=colors.header_bg_color, fill_type="solid"
        )
        self.header_font = Font(bold=True, color=colors.header_font_color)
        self.best_fill = PatternFill(
            start_color=colors.best_row_color, end_color=colors.best_row_color, fill_type="solid"
        )
        self.thin_border = Border(
            left=Side(style='thin'), right=Side(style='thin'),
            top=Side(style='thin'), bottom=Side(style='thin'),
        )
        self.center_align = Alignment(horizontal='center', vertical='center', wrap_text=True)

    # =========================================================================
    # JSON reports
    # =========================================================================

    @property
    def validator(self) -> Draft202012Validator:
        if self._validator is None:
            path = Path(self.settings.schema_path)
            try:
                schema = json.loads(path.read_text(encoding='utf-8'))
            except (OSError, json.JSONDecodeError) as e:
                raise ReportError(f"cannot load report schema {path}: {e}")
            self._validator = Draft202012Validator(schema)
        return self._validator

    def build(self, report: Report) -> Dict[str, Any]:
        """Report as a schema-valid JSON-ready mapping"""
        payload = report.to_dict(SCHEMA_VERSION)
        self.validate(payload)
        return payload

    def validate(self, payload: Dict[str, Any]) -> None:
        errors = sorted(self.validator.iter_errors(payload), key=lambda e: list(e.absolute_path))
        if errors:
            details = "; ".join(
                f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
                for e in errors[:5]
            )
            raise ReportError(f"report does not match schema: {details}")

    def to_json(self, report: Report) -> str:
        return json.dumps(self.build(report), indent=2, allow_nan=False) + "\n"

    def write_json(self, report: Report, path: Union[str, Path]) -> Path:
        text = self.to_json(report)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding='utf-8')
        logger.info(f"Report written to {path}")
        return path

    # =========================================================================
    # Figure data
    # =========================================================================

    @staticmethod
    def hypergeom_frame(n00: int, n01: int, alpha: float = 1.0, beta: float = 1.0) -> pd.DataFrame:
        """a0 factor grid: one row per x00, one column per x01"""
        grid = a0_factor_grid(n00, n01, alpha, beta)
        frame = pd.DataFrame(
            grid,
            index=pd.Index(range(n00 + 1), name='x00'),
            columns=[str(x01) for x01 in range(n01 + 1)],
        )
        return frame

    def write_hypergeom(self, n00: int, n01: int, path: Union[str, Path]) -> Path:
        frame = self.hypergeom_frame(
            n00, n01, self.settings.likelihood.prior_alpha, self.settings.likelihood.prior_beta
        )
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, lineterminator='\n')
        logger.info(f"Wrote {frame.shape[0]}x{frame.shape[1]} grid to {path}")
        return path

    @staticmethod
    def diagnostics_records(rows: List[ModelRow]) -> List[Dict[str, Any]]:
        """One record per explored model; the highest-posterior row is flagged"""
        best_rank = min((row.rank for row in rows), default=None)
        return [
            {
                'model': row.model.positions(),
                'covariates': list(row.covariates),
                'posterior': row.posterior,
                'treated_ratio': as_optional(row.treated_ratio),
                'untreated_e_ratio': as_optional(row.untreated_e_ratio),
                'best': row.rank == best_rank,
            }
            for row in rows
        ]

    def write_diagnostics(self, rows: List[ModelRow], path: Union[str, Path]) -> Path:
        """CSV (empty fields for undefined ratios), or JSON rows for a .json path"""
        records = self.diagnostics_records(rows)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix.lower() == '.json':
            path.write_text(json.dumps(records, indent=2, allow_nan=False) + "\n", encoding='utf-8')
        else:
            frame = pd.DataFrame(
                [
                    {
                        'model': "{" + ",".join(str(p) for p in r['model']) + "}",
                        'covariates': ";".join(r['covariates']),
                        'posterior': r['posterior'],
                        'treated_ratio': r['treated_ratio'],
                        'untreated_e_ratio': r['untreated_e_ratio'],
                        'best': int(r['best']),
                    }
                    for r in records
                ],
                columns=['model', 'covariates', 'posterior', 'treated_ratio', 'untreated_e_ratio', 'best'],
            )
            frame.to_csv(path, index=False, na_rep='', lineterminator='\n')
        logger.info(f"Wrote {len(records)} diagnostic rows to {path}")
        return path

    # =========================================================================
    # Workbook
    # =========================================================================

    def build_workbook(self, report: Report, audit: Optional[AuditTrail] = None) -> io.BytesIO:
        """Styled workbook; batch reports get a Summary sheet first"""
        wb = Workbook()
        ws = wb.active

        reports = report.reports if isinstance(report, BatchReport) else [report]
        if isinstance(report, BatchReport):
            ws.title = "Summary"
            self._create_summary_sheet(ws, report)
            ws = wb.create_sheet("Models")
        else:
            ws.title = "Models"
        self._create_models_sheet(ws, reports)
        self._create_best_sheet(wb.create_sheet("Best Model"), reports)
        if audit is not None:
            self._create_audit_sheet(wb.create_sheet("Audit"), audit)

        output = io.BytesIO()
        wb.save(output)
        output.seek(0)
        return output

    def write_workbook(self, report: Report, audit: Optional[AuditTrail],
                       path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.build_workbook(report, audit).read())
        logger.info(f"Workbook written to {path}")
        return path

    def _write_header(self, ws, row: int, columns) -> None:
        for col, (title, width) in enumerate(columns, 1):
            cell = ws.cell(row=row, column=col, value=title)
            cell.fill = self.header_fill
            cell.font = self.header_font
            cell.border = self.thin_border
            cell.alignment = self.center_align
            ws.column_dimensions[get_column_letter(col)].width = width

    def _create_models_sheet(self, ws, reports: List[AnalysisReport]) -> None:
        columns = [('Target', 14)] + MODEL_COLUMNS
        self._write_header(ws, 1, columns)
        row_idx = 2
        for report in reports:
            for row in report.rows:
                values = [
                    report.target.id,
                    row.rank,
                    str(row.model),
                    ", ".join(row.covariates),
                    row.posterior,
                    row.log_marginal,
                    as_optional(row.estimates.rr),
                    as_optional(row.estimates.pc_lower),
                    as_optional(row.treated_ratio),
                    as_optional(row.untreated_e_ratio),
                ]
                for col, value in enumerate(values, 1):
                    cell = ws.cell(row=row_idx, column=col, value=_cell_value(value))
                    cell.border = self.thin_border
                    if row.rank == 1:
                        cell.fill = self.best_fill
                    if isinstance(value, float):
                        cell.number_format = '0.0000'
                row_idx += 1
        ws.freeze_panes = 'A2'

    def _create_best_sheet(self, ws, reports: List[AnalysisReport]) -> None:
        columns = [('Target', 14), ('Characteristics H selected', 48), ('RR', 10),
                   ('PC lower bound', 16), ('Posterior', 12), ('a11 n/x', 12), ('a0 n/x', 12)]
        self._write_header(ws, 1, columns)
        for row_idx, report in enumerate(reports, 2):
            best = report.best
            values = [
                report.target.id,
                ", ".join(best.covariates) or "(none)",
                as_optional(best.estimates.rr),
                as_optional(best.estimates.pc_lower),
                best.posterior,
                f"{best.counts.a11.n}/{best.counts.a11.x}",
                f"{best.counts.a0.n}/{best.counts.a0.x}",
            ]
            for col, value in enumerate(values, 1):
                cell = ws.cell(row=row_idx, column=col, value=_cell_value(value))
                cell.border = self.thin_border
                if isinstance(value, float):
                    cell.number_format = '0.00'

    def _create_summary_sheet(self, ws, report: BatchReport) -> None:
        ws.merge_cells('A1:D1')
        low, high = as_optional(report.rr_low), as_optional(report.rr_high)
        if low is None:
            ws['A1'] = "RR interval over best models: undefined"
        else:
            ws['A1'] = f"RR interval over best models: [{low:.2f}, {high:.2f}]"
        ws['A1'].font = Font(bold=True, size=14)

        columns = [('Target', 14), ('Characteristics H selected', 48), ('RR', 10), ('PC lower bound', 16)]
        self._write_header(ws, 3, columns)
        for row_idx, summary in enumerate(report.summary_rows(), 4):
            values = [summary['target'], ", ".join(summary['characteristics']) or "(none)",
                      summary['rr'], summary['pc_lower']]
            for col, value in enumerate(values, 1):
                cell = ws.cell(row=row_idx, column=col, value=_cell_value(value))
                cell.border = self.thin_border

    def _create_audit_sheet(self, ws, audit: AuditTrail) -> None:
        frame = audit.to_dataframe()
        columns = [(name.title(), 22) for name in frame.columns]
        self._write_header(ws, 1, columns)
        for row_idx, record in enumerate(frame.itertuples(index=False), 2):
            for col, value in enumerate(record, 1):
                if hasattr(value, 'isoformat'):
                    value = value.isoformat(timespec='seconds')
                ws.cell(row=row_idx, column=col, value=value)
