import * as fs from 'fs'
import { PNG } from 'pngjs'
import * as tf from '@tensorflow/tfjs'

export interface LoadedImage {
  /** [1, H, W, 3] float32 in [0, 1], already resized */
  batch: tf.Tensor4D
  sourceWidth: number
  sourceHeight: number
  resizedWidth: number
  resizedHeight: number
}

/**
 * Decode a PNG and resize so the shorter side equals `shortSide`
 * (bilinear, aspect ratio preserved). Alpha is dropped.
 */
export function loadImage(imagePath: string, shortSide: number): LoadedImage {
  const png = PNG.sync.read(fs.readFileSync(imagePath))
  const { width, height, data } = png
  const scale = shortSide / Math.min(width, height)
  const resizedWidth = Math.max(1, Math.round(width * scale))
  const resizedHeight = Math.max(1, Math.round(height * scale))

  const rgb = new Float32Array(width * height * 3)
  for (let i = 0; i < width * height; i++) {
    rgb[3 * i] = data[4 * i] / 255
    rgb[3 * i + 1] = data[4 * i + 1] / 255
    rgb[3 * i + 2] = data[4 * i + 2] / 255
  }

  const batch = tf.tidy(() => {
    const img = tf.tensor3d(rgb, [height, width, 3])
    const resized = tf.image.resizeBilinear(img, [resizedHeight, resizedWidth])
    return resized.expandDims(0) as tf.Tensor4D
  })
  return { batch, sourceWidth: width, sourceHeight: height, resizedWidth, resizedHeight }
}
