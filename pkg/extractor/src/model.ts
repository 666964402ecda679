import * as tf from '@tensorflow/tfjs'

/**
 * Feature extractor: the conv1 + pool1 stem of the classic 8-layer
 * architecture (96 filters of 11x11 stride 4, then 3x3 max pooling at
 * stride 2, both with 'same' padding). Pretrained weights are not fetched;
 * filters are seeded deterministically, which keeps exports reproducible.
 * Stride/offset geometry is computed analytically from the layer
 * hyperparameters, so it is exact regardless of the weights.
 */

export const MODEL_NAME = 'alexnet-stem'
export const LAYER_NAMES = ['conv1', 'pool1'] as const
export type LayerName = (typeof LAYER_NAMES)[number]

export interface LayerSpec {
  model: string
  layer: string
  /** shorter image side is resized to this many pixels before inference */
  resizeShortSide: number
}

export const DEFAULT_LAYER_SPEC: LayerSpec = {
  model: MODEL_NAME,
  layer: 'pool1',
  resizeShortSide: 224,
}

interface LayerArith {
  /** accumulated sampling stride in resized-image pixels */
  stride: number
  /** output cells for a given resized input extent ('same' padding) */
  outSize: (inputSize: number) => number
}

const LAYER_ARITH: Record<LayerName, LayerArith> = {
  conv1: { stride: 4, outSize: (n) => Math.ceil(n / 4) },
  pool1: { stride: 8, outSize: (n) => Math.ceil(Math.ceil(n / 4) / 2) },
}

export function validateSpec(spec: LayerSpec): LayerName {
  if (spec.model !== MODEL_NAME) {
    throw new Error(`unknown model "${spec.model}"; available models: ${MODEL_NAME}`)
  }
  if (!LAYER_NAMES.includes(spec.layer as LayerName)) {
    throw new Error(`unknown layer "${spec.layer}"; available layers: ${LAYER_NAMES.join(', ')}`)
  }
  if (!Number.isInteger(spec.resizeShortSide) || spec.resizeShortSide < 16) {
    throw new Error(`resize target must be an integer >= 16, got ${spec.resizeShortSide}`)
  }
  return spec.layer as LayerName
}

export function layerStride(layer: LayerName): number {
  return LAYER_ARITH[layer].stride
}

export function layerOutputSize(layer: LayerName, inputSize: number): number {
  return LAYER_ARITH[layer].outSize(inputSize)
}

const WEIGHT_SEED = 7031

export class FeatureModel {
  private readonly net: tf.LayersModel
  readonly layer: LayerName

  constructor(spec: LayerSpec) {
    this.layer = validateSpec(spec)
    const input = tf.input({ shape: [null, null, 3] as unknown as number[] })
    const conv1 = tf.layers
      .conv2d({
        name: 'conv1',
        filters: 96,
        kernelSize: 11,
        strides: 4,
        padding: 'same',
        activation: 'relu',
        kernelInitializer: tf.initializers.heNormal({ seed: WEIGHT_SEED }),
        biasInitializer: 'zeros',
      })
      .apply(input) as tf.SymbolicTensor
    const pool1 = tf.layers
      .maxPooling2d({ name: 'pool1', poolSize: 3, strides: 2, padding: 'same' })
      .apply(conv1) as tf.SymbolicTensor
    const output = this.layer === 'conv1' ? conv1 : pool1
    this.net = tf.model({ inputs: input, outputs: output })
  }

  /**
   * Run one [1, H, W, 3] batch and return channel-major activations.
   */
  activations(batch: tf.Tensor4D): { values: Float32Array; channels: number; height: number; width: number } {
    const chw = tf.tidy(() => {
      const out = this.net.predict(batch) as tf.Tensor4D
      return tf.transpose(out.squeeze([0]), [2, 0, 1])
    })
    const [channels, height, width] = chw.shape as [number, number, number]
    const values = chw.dataSync() as Float32Array
    chw.dispose()
    return { values, channels, height, width }
  }

  dispose(): void {
    this.net.dispose()
  }
}
