/**
 * EMB1 writer/reader, byte-exact against the pipeline's container format:
 *
 *   magic    4 bytes  "EMB1"
 *   version  u16 LE   (1)
 *   dtype    u8       0 = f32, 1 = f64
 *   rank     u8       1..4
 *   dims     rank x u64 LE
 *   label    u8       1 -> trailing u8 labels, one per row
 *   payload  row-major little-endian floats
 */

export const EMB1_MAGIC = 'EMB1'
export const EMB1_VERSION = 1

export interface Emb1Matrix {
  rows: number
  cols: number
  data: Float32Array
  labels?: Uint8Array
}

export class Emb1FormatError extends Error {}

export function encodeEmb1(m: Emb1Matrix): Buffer {
  if (m.data.length !== m.rows * m.cols) {
    throw new Emb1FormatError(
      `data length ${m.data.length} != ${m.rows}x${m.cols}`,
    )
  }
  if (m.labels && m.labels.length !== m.rows) {
    throw new Emb1FormatError(`${m.labels.length} labels for ${m.rows} rows`)
  }
  const headerLen = 4 + 2 + 1 + 1 + 16 + 1
  const header = Buffer.alloc(headerLen)
  header.write(EMB1_MAGIC, 0, 'ascii')
  header.writeUInt16LE(EMB1_VERSION, 4)
  header.writeUInt8(0, 6) // f32
  header.writeUInt8(2, 7) // rank
  header.writeBigUInt64LE(BigInt(m.rows), 8)
  header.writeBigUInt64LE(BigInt(m.cols), 16)
  header.writeUInt8(m.labels ? 1 : 0, 24)

  const payload = Buffer.alloc(m.data.length * 4)
  for (let i = 0; i < m.data.length; i++) {
    payload.writeFloatLE(m.data[i], i * 4)
  }
  const parts = [header, payload]
  if (m.labels) parts.push(Buffer.from(m.labels))
  return Buffer.concat(parts)
}

export function decodeEmb1(buf: Buffer): Emb1Matrix {
  if (buf.length < 8 || buf.toString('ascii', 0, 4) !== EMB1_MAGIC) {
    throw new Emb1FormatError('missing EMB1 magic')
  }
  const version = buf.readUInt16LE(4)
  if (version !== EMB1_VERSION) {
    throw new Emb1FormatError(`unsupported version ${version}`)
  }
  const dtype = buf.readUInt8(6)
  if (dtype !== 0 && dtype !== 1) {
    throw new Emb1FormatError(`unknown dtype code ${dtype}`)
  }
  const rank = buf.readUInt8(7)
  if (rank < 1 || rank > 4) {
    throw new Emb1FormatError(`rank ${rank} outside [1, 4]`)
  }
  const dims: number[] = []
  for (let r = 0; r < rank; r++) {
    dims.push(Number(buf.readBigUInt64LE(8 + 8 * r)))
  }
  const labelFlag = buf.readUInt8(8 + 8 * rank)
  const count = dims.reduce((a, b) => a * b, 1)
  const itemSize = dtype === 0 ? 4 : 8
  const payloadStart = 8 + 8 * rank + 1
  const expected = count * itemSize + (labelFlag ? dims[0] : 0)
  if (buf.length - payloadStart !== expected) {
    throw new Emb1FormatError(
      `dims [${dims}] imply ${expected} payload bytes, found ${buf.length - payloadStart}`,
    )
  }
  const data = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    data[i] =
      dtype === 0
        ? buf.readFloatLE(payloadStart + i * 4)
        : buf.readDoubleLE(payloadStart + i * 8)
  }
  const rows = dims[0]
  const cols = count / rows
  const m: Emb1Matrix = { rows, cols, data }
  if (labelFlag) {
    const labelStart = payloadStart + count * itemSize
    m.labels = new Uint8Array(buf.subarray(labelStart, labelStart + rows))
  }
  return m
}
