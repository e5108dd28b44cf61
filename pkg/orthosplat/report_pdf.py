from datetime import date
from io import BytesIO

from reportlab.lib import colors
from reportlab.lib.pagesizes import A4
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import mm
from reportlab.platypus import Image, Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle


def build_gcp_report_pdf(report, report_context: dict | None = None) -> bytes:
    """
    Build the GCP distance-error report PDF with ReportLab.
    `report` is a GcpErrorReport; `report_context` may carry a title, the
    TDOM directory, the GSD and PNG bytes of a preview image.
    """
    report_context = report_context or {}
    buffer = BytesIO()
    doc = SimpleDocTemplate(
        buffer,
        pagesize=A4,
        leftMargin=18 * mm,
        rightMargin=18 * mm,
        topMargin=20 * mm,
        bottomMargin=14 * mm,
        title=report_context.get("title", "TDOM absolute distance errors"),
    )
    doc.width = doc.pagesize[0] - doc.leftMargin - doc.rightMargin

    styles = getSampleStyleSheet()
    title_style = ParagraphStyle(
        "ReportTitle",
        parent=styles["Title"],
        alignment=1,
        fontSize=14,
        spaceAfter=10,
    )
    subtitle_style = ParagraphStyle(
        "ReportSubtitle",
        parent=styles["Normal"],
        alignment=1,
        fontSize=10,
        textColor=colors.HexColor("#475569"),
        spaceAfter=6,
    )
    section_style = ParagraphStyle(
        "ReportSection",
        parent=styles["Heading2"],
        fontSize=11,
        spaceBefore=12,
        spaceAfter=6,
    )
    small_style = ParagraphStyle(
        "ReportSmall",
        parent=styles["BodyText"],
        fontSize=8,
        leading=11,
        textColor=colors.HexColor("#64748b"),
    )

    story = [
        Paragraph(report_context.get("title", "TDOM absolute distance errors"), title_style),
        Paragraph(report_context.get("generated_on", date.today().isoformat()), subtitle_style),
    ]

    story.append(Paragraph("Setup", section_style))
    setup_rows = [
        ["Scale factor", f"{report.scale_factor:.9g} m/px"],
        ["Anchor pair", "-".join(report.anchor_pair) if report.anchor_pair else "-"],
        ["Earth radius", f"{report.earth_radius:.0f} m"],
    ]
    if report_context.get("tdom_dir"):
        setup_rows.append(["TDOM", str(report_context["tdom_dir"])])
    if report_context.get("gsd"):
        setup_rows.append(["GSD", f"{report_context['gsd']:g} m/px"])
    setup_table = Table(setup_rows, colWidths=[doc.width * 0.3, doc.width * 0.7])
    setup_table.setStyle(
        TableStyle(
            [
                ("FONTSIZE", (0, 0), (-1, -1), 9),
                ("TEXTCOLOR", (0, 0), (0, -1), colors.HexColor("#64748b")),
                ("LINEBELOW", (0, 0), (-1, -1), 0.4, colors.HexColor("#e2e8f0")),
            ]
        )
    )
    story.append(setup_table)

    story.append(Paragraph("Absolute distance error per GCP pair", section_style))
    rows = [["GCP pair", "True (m)", "TDOM (m)", "Abs. error (m)"]]
    for item in report.pair_errors:
        rows.append([
            item.pair_id,
            f"{item.true_distance:.3f}",
            f"{item.measured_distance:.3f}",
            f"{item.absolute_error:.3f}",
        ])
    error_table = Table(rows, colWidths=[doc.width * 0.31, doc.width * 0.23, doc.width * 0.23, doc.width * 0.23], repeatRows=1)
    error_table.setStyle(
        TableStyle(
            [
                ("BACKGROUND", (0, 0), (-1, 0), colors.HexColor("#1d4ed8")),
                ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
                ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
                ("FONTSIZE", (0, 0), (-1, -1), 9),
                ("ALIGN", (1, 0), (-1, -1), "RIGHT"),
                ("ROWBACKGROUNDS", (0, 1), (-1, -1), [colors.white, colors.HexColor("#f8fafc")]),
                ("BOX", (0, 0), (-1, -1), 0.8, colors.HexColor("#cbd5e1")),
            ]
        )
    )
    story.append(error_table)
    story.append(Spacer(1, 6))
    story.append(
        Paragraph(
            f"Mean {report.mean_error:.3f} m, minimum {report.min_error:.3f} m, maximum {report.max_error:.3f} m.",
            small_style,
        )
    )

    preview = report_context.get("preview_png")
    if preview:
        story.append(Paragraph("TDOM preview", section_style))
        image = Image(BytesIO(preview))
        ratio = image.imageHeight / float(image.imageWidth or 1)
        image.drawWidth = doc.width
        image.drawHeight = doc.width * ratio
        story.append(image)

    doc.build(story)
    return buffer.getvalue()
