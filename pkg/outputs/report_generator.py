"""Reporte PDF de localización.

Crea un documento PDF con:
 - Tabla de métricas (GT-Loc / Top-1-Loc) por modo de mapa
 - Para las primeras muestras: imagen con el heatmap superpuesto, caja(s)
   ground-truth en rojo y caja predicha en verde

Uso:
    generator = ReportGenerator(title="CAM vs infoCAM", dataset="mmnist-test")
    pdf_path = generator.generate_report(
        metrics_by_mode={"cam": {...}, "infocam": {...}},
        panels=[LocalizationPanel(...), ...],
        output_path="out/locate.pdf",
    )
"""
from __future__ import annotations

import logging
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import cv2
import numpy as np

try:
    from reportlab.lib import colors
    from reportlab.lib.pagesizes import A4
    from reportlab.lib.units import inch
    from reportlab.lib.utils import ImageReader
    from reportlab.pdfgen import canvas as pdf_canvas
    HAS_REPORTLAB = True
except ImportError:
    HAS_REPORTLAB = False

LOG = logging.getLogger(__name__)

Box = Tuple[int, int, int, int]

GT_COLOR_BGR = (0, 0, 255)
PRED_COLOR_BGR = (0, 255, 0)
PANEL_SCALE = 6


@dataclass(frozen=True)
class LocalizationPanel:
    """Una muestra para el reporte: imagen, heatmap a resolución de entrada y cajas (x_min, y_min, x_max, y_max)."""

    image: np.ndarray
    heatmap: np.ndarray
    gt_boxes: Sequence[Box]
    predicted_box: Box
    label: int
    mode: str
    iou: float


def render_overlay(panel: LocalizationPanel, scale: int = PANEL_SCALE, alpha: float = 0.45) -> np.ndarray:
    """Imagen BGR u8 con heatmap (colormap JET) y cajas dibujadas."""
    image = np.clip(np.asarray(panel.image, dtype=np.float64), 0.0, 1.0)
    gray = cv2.cvtColor((image * 255.0).astype(np.uint8), cv2.COLOR_GRAY2BGR)
    heat = np.asarray(panel.heatmap, dtype=np.float64)
    span = heat.max() - heat.min()
    heat_u8 = np.full(heat.shape, 255, np.uint8) if span == 0 else ((heat - heat.min()) / span * 255).astype(np.uint8)
    blended = cv2.addWeighted(gray, 1.0 - alpha, cv2.applyColorMap(heat_u8, cv2.COLORMAP_JET), alpha, 0.0)
    h, w = image.shape
    big = cv2.resize(blended, (w * scale, h * scale), interpolation=cv2.INTER_NEAREST)

    def draw(box: Box, color: Tuple[int, int, int]) -> None:
        x0, y0, x1, y1 = box
        cv2.rectangle(big, (x0 * scale, y0 * scale), ((x1 + 1) * scale - 1, (y1 + 1) * scale - 1), color, 2)

    for box in panel.gt_boxes:
        draw(box, GT_COLOR_BGR)
    draw(panel.predicted_box, PRED_COLOR_BGR)
    return big


class ReportGenerator:
    """Generador de reportes PDF de localización."""

    def __init__(self, title: str = "Localización débilmente supervisada", dataset: str = "",
                 build_id: str = "", seed: Optional[int] = None) -> None:
        if not HAS_REPORTLAB:
            LOG.warning("reportlab no instalado. Instala con: pip install reportlab")
        self.title = title
        self.dataset = dataset
        self.build_id = build_id
        self.seed = seed

    def generate_report(
        self,
        metrics_by_mode: Mapping[str, Mapping[str, Any]],
        panels: Sequence[LocalizationPanel],
        output_path: Union[str, Path],
    ) -> Optional[str]:
        """Genera el PDF.

        Args:
            metrics_by_mode: modo -> dict con gt_loc, top1_loc, n_samples, region_size.
            panels: muestras a dibujar (una por fila).
            output_path: ruta del PDF.

        Returns:
            Ruta del PDF, o None si reportlab no está disponible o falla la escritura.
        """
        if not HAS_REPORTLAB:
            LOG.error("reportlab no está disponible. Instala con: pip install reportlab")
            return None

        tmp_dir = tempfile.TemporaryDirectory(prefix="miest-report-")
        try:
            path = Path(output_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            image_paths: List[str] = []
            for i, panel in enumerate(panels):
                image_path = str(Path(tmp_dir.name) / f"panel_{i:03d}.png")
                cv2.imwrite(image_path, render_overlay(panel))
                image_paths.append(image_path)
            self._create_pdf(str(path), metrics_by_mode, panels, image_paths)
            LOG.info("Reporte PDF generado: %s", path)
            return str(path)
        except Exception as exc:
            LOG.exception("Error generando reporte PDF: %s", exc)
            return None
        finally:
            tmp_dir.cleanup()

    def _create_pdf(self, pdf_path: str, metrics_by_mode: Mapping[str, Mapping[str, Any]],
                    panels: Sequence[LocalizationPanel], image_paths: Sequence[str]) -> None:
        c = pdf_canvas.Canvas(pdf_path, pagesize=A4)
        width, height = A4

        def header() -> float:
            c.setFont("Helvetica-Bold", 16)
            c.drawString(0.5 * inch, height - 0.7 * inch, self.title)
            c.setFont("Helvetica", 9)
            c.drawString(0.5 * inch, height - 0.95 * inch,
                         f"Dataset: {self.dataset}   Semilla: {self.seed}   Build: {self.build_id}")
            c.setLineWidth(1)
            c.line(0.5 * inch, height - 1.1 * inch, width - 0.5 * inch, height - 1.1 * inch)
            return height - 1.4 * inch

        y_pos = header()
        c.setFont("Helvetica-Bold", 11)
        c.drawString(0.5 * inch, y_pos, "Modo")
        c.drawString(2.0 * inch, y_pos, "R")
        c.drawString(2.6 * inch, y_pos, "GT-Loc")
        c.drawString(3.6 * inch, y_pos, "Top-1-Loc")
        c.drawString(4.8 * inch, y_pos, "Muestras")
        c.setFont("Helvetica", 11)
        for mode, metrics in metrics_by_mode.items():
            y_pos -= 0.25 * inch
            c.drawString(0.5 * inch, y_pos, str(mode))
            c.drawString(2.0 * inch, y_pos, str(metrics.get("region_size", "")))
            c.drawString(2.6 * inch, y_pos, f"{metrics['gt_loc']:.4f}")
            c.drawString(3.6 * inch, y_pos, f"{metrics['top1_loc']:.4f}")
            c.drawString(4.8 * inch, y_pos, str(metrics.get("n_samples", "")))
        y_pos -= 0.45 * inch

        for panel, image_path in zip(panels, image_paths):
            reader = ImageReader(image_path)
            img_w, img_h = reader.getSize()
            scale = min((width - 1.0 * inch) / img_w, 1.6 * inch / img_h, 1.0)
            draw_w, draw_h = img_w * scale, img_h * scale
            if y_pos - draw_h - 0.3 * inch < 0.7 * inch:
                c.showPage()
                y_pos = header()
            c.setFont("Helvetica", 9)
            c.drawString(0.5 * inch, y_pos,
                         f"{panel.mode}  etiqueta {panel.label}  IoU {panel.iou:.3f}  (rojo: GT, verde: predicha)")
            y_pos -= 0.1 * inch
            c.drawImage(reader, 0.5 * inch, y_pos - draw_h, width=draw_w, height=draw_h)
            y_pos -= draw_h + 0.3 * inch

        c.setFont("Helvetica", 8)
        c.setFillColor(colors.grey)
        c.drawString(0.5 * inch, 0.4 * inch, "Reporte generado por miest")
        c.save()
