"""
File handler: uploaded model/rule/scenario files, table downloads, and the
Word (DOCX) report of a scenario comparison.
"""

import io
import json
import os
from datetime import datetime
from docx import Document
from docx.shared import Pt
from core import settings
from core.econ import comparison_frame, monthly_frame


def read_uploaded_file(uploaded_file) -> str:
    """
    Read an uploaded text file (model document, rule table, scenario file).

    Args:
        uploaded_file: Streamlit UploadedFile object (or any binary file-like)

    Returns:
        File content as string
    """
    content = uploaded_file.read()
    try:
        return content.decode("utf-8")
    except UnicodeDecodeError:
        return content.decode("latin-1")


def rewound(uploaded_file):
    """Uploaded file positioned at its start."""
    uploaded_file.seek(0)
    return uploaded_file


def frame_to_bytes(frame, fmt: str = "csv") -> bytes:
    """Serialize a table for a download button, same layout as the CLI exports."""
    if fmt == "json":
        records = json.loads(frame.to_json(orient="records", double_precision=10))
        return (json.dumps(records, indent=2) + "\n").encode("utf-8")
    return frame.to_csv(index=False, na_rep="", float_format="%.10g", lineterminator="\n").encode("utf-8")


# ============================================================
# Word report
# ============================================================

def _fmt(value) -> str:
    if value is None or value != value:
        return ""
    if isinstance(value, float):
        return f"{value:,.2f}"
    return str(value)


def _add_table(doc, frame, font_size: int = 8):
    table = doc.add_table(rows=1, cols=len(frame.columns))
    table.style = "Table Grid"
    for cell, name in zip(table.rows[0].cells, frame.columns):
        cell.text = str(name)
    for values in frame.itertuples(index=False):
        cells = table.add_row().cells
        for cell, value in zip(cells, values):
            cell.text = _fmt(value)

    for row in table.rows:
        for cell in row.cells:
            for para in cell.paragraphs:
                for run in para.runs:
                    run.font.size = Pt(font_size)
    return table


def build_docx_report(comparison, monthly=None, title: str = "Hydrogen Scenario Comparison", notes: list[str] | None = None) -> bytes:
    """
    Build a Word report with the yearly comparison table and, optionally,
    the monthly breakdown.

    Args:
        comparison: ComparisonRow list
        monthly: MonthlyAggregate list
        title: Document heading
        notes: Extra paragraphs (inputs used, settings)

    Returns:
        DOCX file as bytes
    """
    doc = Document()
    doc.core_properties.title = title
    doc.add_heading(title, level=1)

    for note in notes or []:
        doc.add_paragraph(note)

    doc.add_heading("Yearly comparison", level=2)
    _add_table(doc, comparison_frame(comparison))
    doc.add_paragraph("Total cost is electricity plus operating cost; credits are listed separately.")

    if monthly:
        doc.add_heading("Monthly breakdown", level=2)
        _add_table(doc, monthly_frame(monthly))

    buf = io.BytesIO()
    doc.save(buf)
    return buf.getvalue()


def save_report(report_bytes: bytes, path: str | None = None) -> str:
    """
    Save a DOCX report.

    Args:
        report_bytes: Output of build_docx_report
        path: Target file (default: timestamped file under OUTPUT_DIR)

    Returns:
        Path to the saved file
    """
    if path is None:
        os.makedirs(settings.OUTPUT_DIR, exist_ok=True)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        path = os.path.join(settings.OUTPUT_DIR, f"comparison_{timestamp}.docx")
    else:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)

    with open(path, "wb") as f:
        f.write(report_bytes)
    return path
