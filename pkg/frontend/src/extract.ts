/**
 * Batch embedding extraction: IDX images -> pretrained encoder -> EMB1.
 *
 * Grayscale 28x28 inputs are replicated to three channels and resized to
 * the encoder's native resolution by the model's own processor; the exact
 * recipe is recorded in the JSON sidecar next to the output file so runs
 * are reproducible.
 */

import { createHash } from 'crypto'
import { writeFileSync } from 'fs'

import { encodeEmb1 } from './emb1.js'
import { IdxImages, imageAt, loadIdxImages, loadIdxLabels } from './idx.js'
import { ExtractorSpec, ModelUnavailable, specFor } from './models.js'

/** One grayscale image ready for encoding. */
export interface GrayImage {
  pixels: Uint8Array
  width: number
  height: number
}

/** Anything that turns image batches into fixed-width embeddings. */
export interface Encoder {
  outputDim: number
  encode(batch: GrayImage[]): Promise<Float32Array[]>
  describe(): Record<string, unknown>
}

export class ClipEncoder implements Encoder {
  private constructor(
    readonly spec: ExtractorSpec,
    private processor: any,
    private model: any,
    private RawImage: any,
  ) {}

  get outputDim() {
    return this.spec.outputDim
  }

  static async load(modelId: string): Promise<ClipEncoder> {
    const spec = specFor(modelId)
    let transformers: any
    try {
      transformers = await import('@huggingface/transformers')
    } catch (err) {
      throw new ModelUnavailable(`transformers runtime not installed: ${err}`)
    }
    const { env, AutoProcessor, CLIPVisionModelWithProjection, AutoModel, RawImage } =
      transformers
    if (process.env.HF_REMOTE_HOST) {
      env.remoteHost = process.env.HF_REMOTE_HOST
    }
    if (process.env.QKSVM_MODEL_CACHE) {
      env.cacheDir = process.env.QKSVM_MODEL_CACHE
    }
    try {
      const processor = await AutoProcessor.from_pretrained(spec.hubId)
      const model =
        spec.kind === 'clip'
          ? await CLIPVisionModelWithProjection.from_pretrained(spec.hubId, {
              dtype: 'q8',
            })
          : await AutoModel.from_pretrained(spec.hubId, { dtype: 'q8' })
      return new ClipEncoder(spec, processor, model, RawImage)
    } catch (err) {
      throw new ModelUnavailable(
        `could not load ${spec.hubId}: ${(err as Error).message}`,
      )
    }
  }

  async encode(batch: GrayImage[]): Promise<Float32Array[]> {
    const images = batch.map((img) =>
      new this.RawImage(
        Uint8ClampedArray.from(img.pixels),
        img.width,
        img.height,
        1,
      ).rgb(),
    )
    const inputs = await this.processor(images)
    const out = await this.model(inputs)
    const tensor = out.image_embeds ?? out.pooler_output ?? out.last_hidden_state
    if (!tensor) {
      throw new ModelUnavailable('model emitted no embedding tensor')
    }
    let data: Float32Array = tensor.data
    let dim = tensor.dims[tensor.dims.length - 1]
    if (tensor.dims.length === 3) {
      // token sequence: mean-pool over the sequence axis
      const [n, seq, d] = tensor.dims
      const pooled = new Float32Array(n * d)
      for (let i = 0; i < n; i++) {
        for (let s = 0; s < seq; s++) {
          for (let j = 0; j < d; j++) {
            pooled[i * d + j] += data[(i * seq + s) * d + j] / seq
          }
        }
      }
      data = pooled
      dim = d
    }
    const rows: Float32Array[] = []
    for (let i = 0; i < batch.length; i++) {
      rows.push(Float32Array.from(data.subarray(i * dim, (i + 1) * dim)))
    }
    return rows
  }

  describe() {
    return {
      model: this.spec.id,
      hub_id: this.spec.hubId,
      kind: this.spec.kind,
      dtype: 'q8',
      preprocessing:
        'grayscale replicated to RGB, processor resize+normalize to ' +
        `${this.spec.inputSize}px`,
    }
  }
}

export interface ExtractOptions {
  imagesPath: string
  outPath: string
  labelsPath?: string
  /** restrict to these image rows, in the given order */
  indices?: number[]
  batchSize?: number
  /** progress callback, called after each batch */
  onProgress?: (done: number, total: number) => void
}

export interface ExtractResult {
  rows: number
  cols: number
  sidecarPath: string
}

export async function extractToEmb1(
  encoder: Encoder,
  opts: ExtractOptions,
): Promise<ExtractResult> {
  const images: IdxImages = loadIdxImages(opts.imagesPath)
  const order = opts.indices ?? Array.from({ length: images.count }, (_, i) => i)
  for (const i of order) {
    if (i < 0 || i >= images.count) {
      throw new RangeError(`image index ${i} outside [0, ${images.count})`)
    }
  }
  let labels: Uint8Array | undefined
  if (opts.labelsPath) {
    const all = loadIdxLabels(opts.labelsPath)
    if (all.length !== images.count) {
      throw new RangeError(
        `${all.length} labels for ${images.count} images`,
      )
    }
    labels = Uint8Array.from(order.map((i) => all[i]))
  }

  const batchSize = opts.batchSize ?? 16
  const dim = encoder.outputDim
  const data = new Float32Array(order.length * dim)
  for (let start = 0; start < order.length; start += batchSize) {
    const ids = order.slice(start, start + batchSize)
    const batch = ids.map((i) => ({
      pixels: imageAt(images, i),
      width: images.width,
      height: images.height,
    }))
    const rows = await encoder.encode(batch)
    rows.forEach((row, k) => {
      if (row.length !== dim) {
        throw new ModelUnavailable(
          `encoder emitted ${row.length}-dim rows, expected ${dim}`,
        )
      }
      data.set(row, (start + k) * dim)
    })
    opts.onProgress?.(Math.min(start + batchSize, order.length), order.length)
  }

  const payload = encodeEmb1({ rows: order.length, cols: dim, data, labels })
  writeFileSync(opts.outPath, payload)

  // batch size is part of the recipe: quantized models compute activation
  // scales per batch, so embeddings depend on batch composition
  const recipe = { ...encoder.describe(), batch_size: batchSize }
  const sidecar = {
    stage: 'embed-extract',
    ...recipe,
    rows: order.length,
    cols: dim,
    source_images: opts.imagesPath,
    recipe_hash: createHash('sha256')
      .update(JSON.stringify(recipe))
      .digest('hex')
      .slice(0, 16),
  }
  const sidecarPath = opts.outPath + '.json'
  writeFileSync(sidecarPath, JSON.stringify(sidecar, null, 2))
  return { rows: order.length, cols: dim, sidecarPath }
}
