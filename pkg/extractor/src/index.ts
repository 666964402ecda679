export { ActivationExtractor, BatchResult, ExportInfo } from './export'
export { loadImage, LoadedImage } from './image'
export {
  DEFAULT_LAYER_SPEC,
  FeatureModel,
  LAYER_NAMES,
  LayerName,
  LayerSpec,
  MODEL_NAME,
  layerOutputSize,
  layerStride,
  validateSpec,
} from './model'
export {
  GEOM_SIDECAR_SUFFIX,
  GeometryMeta,
  RFM1_MAGIC,
  StackShape,
  decodeRfm1,
  encodeRfm1,
  writeFeatureStack,
} from './rfm'
