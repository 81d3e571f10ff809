/** Sanity checks over an emitted EMB1 file: header, finiteness, row variety. */

import { readFileSync } from 'fs'

import { decodeEmb1, Emb1FormatError } from './emb1.js'

export interface SmokeReport {
  ok: boolean
  reasons: string[]
  rows?: number
  cols?: number
}

export function smokeCheck(path: string): SmokeReport {
  const reasons: string[] = []
  let buf: Buffer
  try {
    buf = readFileSync(path)
  } catch (err) {
    return { ok: false, reasons: [`unreadable: ${(err as Error).message}`] }
  }
  let m
  try {
    m = decodeEmb1(buf)
  } catch (err) {
    if (err instanceof Emb1FormatError) {
      return { ok: false, reasons: [`malformed EMB1: ${err.message}`] }
    }
    throw err
  }

  for (let i = 0; i < m.data.length; i++) {
    if (!Number.isFinite(m.data[i])) {
      reasons.push(`non-finite value at flat index ${i}`)
      break
    }
  }

  let constantRows = 0
  for (let r = 0; r < m.rows; r++) {
    const first = m.data[r * m.cols]
    let constant = true
    for (let c = 1; c < m.cols; c++) {
      if (m.data[r * m.cols + c] !== first) {
        constant = false
        break
      }
    }
    if (constant) constantRows++
  }
  if (m.rows > 0 && constantRows === m.rows) {
    reasons.push('every row is constant: embedding collapsed')
  }

  return { ok: reasons.length === 0, reasons, rows: m.rows, cols: m.cols }
}
