from pathlib import Path

from apps.evaluation.geodesy import format_error_table, gcp_errors, gcp_scale_align, read_gcp_csv, write_error_csv
from apps.pipeline.base import PipelineCommand
from apps.tdom.exports import COLOR_FILE, read_products
from orthosplat.report_pdf import build_gcp_report_pdf


TABLE_FILE = 'gcp_errors.txt'
CSV_FILE = 'gcp_errors.csv'
PDF_FILE = 'gcp_report.pdf'


class Command(PipelineCommand):
    help = 'Absolute distance errors between GCP pairs measured on a TDOM, after scale alignment on one anchor pair.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('tdom_dir', help='Output directory of the render command.')
        parser.add_argument('gcp_csv', help='CSV with header id,lat,lon,px,py.')
        parser.add_argument('--anchor-pair', nargs=2, required=True, metavar=('ID1', 'ID2'), help='GCP pair used for scale alignment.')
        parser.add_argument('--out-dir', help='Report directory (default: <tdom_dir>/gcp).')
        parser.add_argument('--no-pdf', action='store_true', help='Skip the PDF report (default: off).')

    def handle(self, *args, **options):
        anchor = tuple(options['anchor_pair'])
        tdom_dir = self.require_path(options['tdom_dir'], 'read-tdom', directory=True)
        gcp_csv = self.require_path(options['gcp_csv'], 'read-gcps')
        out_dir = Path(options['out_dir']) if options['out_dir'] else tdom_dir / 'gcp'
        self.start_run(options, {'anchor_pair': list(anchor), 'pdf': not options['no_pdf']})
        self.record_inputs(gcp_csv, tdom_dir / COLOR_FILE)

        with self.stage('read-tdom', tdom_dir):
            product = read_products(tdom_dir)
        with self.stage('read-gcps', gcp_csv):
            gcps = read_gcp_csv(gcp_csv)
        with self.stage('evaluate', gcp_csv):
            scale = gcp_scale_align(gcps, anchor)
            report = gcp_errors(gcps, scale, anchor_pair=anchor, image_size=(product.width, product.height))

        outputs = []
        with self.stage('write-report', out_dir):
            out_dir.mkdir(parents=True, exist_ok=True)
            table = format_error_table(report)
            (out_dir / TABLE_FILE).write_text(table, encoding='utf-8')
            outputs.append(out_dir / TABLE_FILE)
            outputs.append(write_error_csv(report, out_dir / CSV_FILE))
            if not options['no_pdf']:
                pdf = build_gcp_report_pdf(report, {
                    'tdom_dir': tdom_dir,
                    'gsd': product.geo_transform.pixel_width,
                    'preview_png': (tdom_dir / COLOR_FILE).read_bytes(),
                })
                (out_dir / PDF_FILE).write_bytes(pdf)
                outputs.append(out_dir / PDF_FILE)

        self.finish_run(out_dir, outputs)
        self.stdout.write(table)
        self.stdout.write(self.style.SUCCESS(f'GCP report written to {out_dir}.'))
