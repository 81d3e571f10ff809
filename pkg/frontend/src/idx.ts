/**
 * Minimal IDX reader for the MNIST-family files the extractor consumes.
 * Big-endian headers; magic 0x00000803 for u8 image stacks and
 * 0x00000801 for u8 label vectors. Gzipped files are inflated on read.
 */

import { readFileSync } from 'fs'
import { gunzipSync } from 'zlib'

export const IDX_MAGIC_IMAGES = 0x00000803
export const IDX_MAGIC_LABELS = 0x00000801

export interface IdxImages {
  count: number
  height: number
  width: number
  /** row-major pixels, one byte per pixel, image-major */
  pixels: Uint8Array
}

export class IdxFormatError extends Error {}

export function parseIdxImages(buf: Buffer): IdxImages {
  if (buf.length < 16) {
    throw new IdxFormatError(`image stream too short (${buf.length} bytes)`)
  }
  const magic = buf.readUInt32BE(0)
  if (magic !== IDX_MAGIC_IMAGES) {
    throw new IdxFormatError(`bad image magic 0x${magic.toString(16)}`)
  }
  const count = buf.readUInt32BE(4)
  const height = buf.readUInt32BE(8)
  const width = buf.readUInt32BE(12)
  const expected = count * height * width
  const payload = buf.subarray(16)
  if (payload.length !== expected) {
    throw new IdxFormatError(
      `payload ${payload.length} bytes, header promises ${expected}`,
    )
  }
  return { count, height, width, pixels: new Uint8Array(payload) }
}

export function parseIdxLabels(buf: Buffer): Uint8Array {
  if (buf.length < 8) {
    throw new IdxFormatError(`label stream too short (${buf.length} bytes)`)
  }
  const magic = buf.readUInt32BE(0)
  if (magic !== IDX_MAGIC_LABELS) {
    throw new IdxFormatError(`bad label magic 0x${magic.toString(16)}`)
  }
  const count = buf.readUInt32BE(4)
  const payload = buf.subarray(8)
  if (payload.length !== count) {
    throw new IdxFormatError(
      `payload ${payload.length} bytes, header promises ${count}`,
    )
  }
  return new Uint8Array(payload)
}

function readMaybeGz(path: string): Buffer {
  let raw = readFileSync(path)
  if (raw.length >= 2 && raw[0] === 0x1f && raw[1] === 0x8b) {
    raw = gunzipSync(raw)
  }
  return raw
}

export function loadIdxImages(path: string): IdxImages {
  return parseIdxImages(readMaybeGz(path))
}

export function loadIdxLabels(path: string): Uint8Array {
  return parseIdxLabels(readMaybeGz(path))
}

/** One image as a standalone grayscale pixel grid. */
export function imageAt(images: IdxImages, index: number): Uint8Array {
  const size = images.height * images.width
  return images.pixels.subarray(index * size, (index + 1) * size)
}
