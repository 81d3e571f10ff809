/**
 * Encoder catalog: the five pretrained models the benchmark compares, with
 * their native output dimensions. Hub weights resolve through the standard
 * HF layout; point HF_REMOTE_HOST at a mirror when the default host is
 * unreachable.
 */

export interface ExtractorSpec {
  /** short id used on the CLI */
  id: string
  /** hub repo with ONNX exports */
  hubId: string
  /** embedding dimension the encoder emits */
  outputDim: number
  /** encoder family: clip vision tower or CNN feature extractor */
  kind: 'clip' | 'cnn'
  inputSize: number
}

export const MODELS: Record<string, ExtractorSpec> = {
  'vit-b32': {
    id: 'vit-b32',
    hubId: 'Xenova/clip-vit-base-patch32',
    outputDim: 512,
    kind: 'clip',
    inputSize: 224,
  },
  'vit-b16': {
    id: 'vit-b16',
    hubId: 'Xenova/clip-vit-base-patch16',
    outputDim: 512,
    kind: 'clip',
    inputSize: 224,
  },
  'vit-l14': {
    id: 'vit-l14',
    hubId: 'Xenova/clip-vit-large-patch14',
    outputDim: 768,
    kind: 'clip',
    inputSize: 224,
  },
  'vit-l14-336': {
    id: 'vit-l14-336',
    hubId: 'Xenova/clip-vit-large-patch14-336',
    outputDim: 768,
    kind: 'clip',
    inputSize: 336,
  },
  effnet: {
    id: 'effnet',
    hubId: 'Xenova/efficientnet-b3',
    outputDim: 1536,
    kind: 'cnn',
    inputSize: 300,
  },
}

export class ModelUnavailable extends Error {}

export function specFor(id: string): ExtractorSpec {
  const spec = MODELS[id]
  if (!spec) {
    throw new ModelUnavailable(
      `unknown model '${id}'; known: ${Object.keys(MODELS).join(', ')}`,
    )
  }
  return spec
}
