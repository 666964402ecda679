import * as fs from 'fs'
import * as path from 'path'
import { loadImage } from './image'
import { DEFAULT_LAYER_SPEC, FeatureModel, LayerSpec, layerOutputSize, layerStride } from './model'
import { writeFeatureStack } from './rfm'

export interface ExportInfo {
  imagePath: string
  outPath: string
  channels: number
  height: number
  width: number
  stride: number
  resizedWidth: number
  resizedHeight: number
}

export interface BatchResult {
  exported: ExportInfo[]
  skipped: string[]
  manifestPath: string
}

/**
 * Runs the chosen layer over images and writes RFM1 stacks whose geometry
 * sidecars carry the analytically accumulated stride/offset. Box
 * coordinates downstream therefore live in the resized image's pixel
 * space; the source dimensions ride along as extra sidecar fields.
 */
export class ActivationExtractor {
  readonly spec: LayerSpec
  private readonly model: FeatureModel

  constructor(spec: Partial<LayerSpec> = {}) {
    this.spec = { ...DEFAULT_LAYER_SPEC, ...spec }
    this.model = new FeatureModel(this.spec)
  }

  exportImage(imagePath: string, outPath: string): ExportInfo {
    const image = loadImage(imagePath, this.spec.resizeShortSide)
    try {
      const { values, channels, height, width } = this.model.activations(image.batch)
      const stride = layerStride(this.model.layer)
      if (height !== layerOutputSize(this.model.layer, image.resizedHeight)) {
        throw new Error(`layer emitted ${height} rows, arithmetic predicted another value`)
      }
      if (width !== layerOutputSize(this.model.layer, image.resizedWidth)) {
        throw new Error(`layer emitted ${width} cols, arithmetic predicted another value`)
      }
      writeFeatureStack(
        outPath,
        values,
        { channels, height, width },
        {
          stride_x: stride,
          stride_y: stride,
          offset_x: 0,
          offset_y: 0,
          image_w: image.resizedWidth,
          image_h: image.resizedHeight,
        },
        {
          source_image_w: image.sourceWidth,
          source_image_h: image.sourceHeight,
          resize_short_side: this.spec.resizeShortSide,
          model: this.spec.model,
          layer: this.spec.layer,
        },
      )
      return {
        imagePath,
        outPath,
        channels,
        height,
        width,
        stride,
        resizedWidth: image.resizedWidth,
        resizedHeight: image.resizedHeight,
      }
    } finally {
      image.batch.dispose()
    }
  }

  /**
   * Export every PNG in a directory; unreadable files are skipped with a
   * note on stderr. Emits `manifest.jsonl` mapping image_id (file stem)
   * to the written RFM1 path.
   */
  exportBatch(imageDir: string, outDir: string): BatchResult {
    const entries = fs
      .readdirSync(imageDir)
      .filter((name) => name.toLowerCase().endsWith('.png'))
      .sort()
    if (entries.length === 0) {
      throw new Error(`no .png images in ${imageDir}`)
    }
    fs.mkdirSync(outDir, { recursive: true })
    const exported: ExportInfo[] = []
    const skipped: string[] = []
    const manifestLines: string[] = []
    for (const name of entries) {
      const imagePath = path.join(imageDir, name)
      const stem = path.basename(name, path.extname(name))
      const outPath = path.join(outDir, `${stem}.rfm`)
      try {
        exported.push(this.exportImage(imagePath, outPath))
        manifestLines.push(JSON.stringify({ image_id: stem, rfm: `${stem}.rfm` }))
      } catch (err) {
        skipped.push(imagePath)
        process.stderr.write(`skipping ${imagePath}: ${(err as Error).message}\n`)
      }
    }
    const manifestPath = path.join(outDir, 'manifest.jsonl')
    fs.writeFileSync(manifestPath, manifestLines.map((l) => l + '\n').join(''))
    return { exported, skipped, manifestPath }
  }

  dispose(): void {
    this.model.dispose()
  }
}
