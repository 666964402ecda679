import * as fs from 'fs'

/**
 * RFM1 binary layout: magic bytes "RFM1", then C, H, W as unsigned 32-bit
 * little-endian integers, then C*H*W 32-bit little-endian floats,
 * channel-major and row-major within each channel. The consumer reads
 * geometry from a JSON sidecar at `<path>.geom.json`.
 */

export const RFM1_MAGIC = 'RFM1'
export const GEOM_SIDECAR_SUFFIX = '.geom.json'

export interface GeometryMeta {
  stride_x: number
  stride_y: number
  offset_x: number
  offset_y: number
  image_w: number
  image_h: number
}

export interface StackShape {
  channels: number
  height: number
  width: number
}

export function encodeRfm1(values: Float32Array, shape: StackShape): Buffer {
  const { channels, height, width } = shape
  const count = channels * height * width
  if (values.length !== count) {
    throw new Error(`expected ${count} values for ${channels}x${height}x${width}, got ${values.length}`)
  }
  for (let i = 0; i < values.length; i++) {
    if (!Number.isFinite(values[i])) {
      throw new Error(`non-finite activation at flat index ${i}`)
    }
  }
  const buf = Buffer.alloc(16 + 4 * count)
  buf.write(RFM1_MAGIC, 0, 'ascii')
  buf.writeUInt32LE(channels, 4)
  buf.writeUInt32LE(height, 8)
  buf.writeUInt32LE(width, 12)
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(values[i], 16 + 4 * i)
  }
  return buf
}

export function decodeRfm1(buf: Buffer): { shape: StackShape; values: Float32Array } {
  if (buf.length < 16 || buf.toString('ascii', 0, 4) !== RFM1_MAGIC) {
    throw new Error('not an RFM1 buffer')
  }
  const shape = {
    channels: buf.readUInt32LE(4),
    height: buf.readUInt32LE(8),
    width: buf.readUInt32LE(12),
  }
  const count = shape.channels * shape.height * shape.width
  if (buf.length !== 16 + 4 * count) {
    throw new Error(`payload length ${buf.length - 16} does not match declared shape`)
  }
  const values = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    values[i] = buf.readFloatLE(16 + 4 * i)
  }
  return { shape, values }
}

/**
 * Write the binary stack plus its geometry sidecar. Extra sidecar fields
 * (source image size, model/layer provenance) ride along; the consumer
 * ignores keys beyond the six geometry fields.
 */
export function writeFeatureStack(
  outPath: string,
  values: Float32Array,
  shape: StackShape,
  geom: GeometryMeta,
  extras: Record<string, number | string> = {},
): void {
  fs.writeFileSync(outPath, encodeRfm1(values, shape))
  const sidecar = { ...geom, ...extras }
  fs.writeFileSync(outPath + GEOM_SIDECAR_SUFFIX, JSON.stringify(sidecar, null, 2) + '\n')
}
