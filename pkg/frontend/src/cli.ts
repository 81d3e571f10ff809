#!/usr/bin/env node
/**
 * CLI: extract pretrained-encoder embeddings from IDX images into EMB1.
 *
 *   qksvm-extract extract --model vit-b32 --in train-images.idx.gz \
 *       --labels train-labels.idx.gz --out vitb32.emb1 [--indices sel.json]
 *   qksvm-extract smoke --in vitb32.emb1
 */

import { readFileSync } from 'fs'
import { parseArgs } from 'util'

import { ClipEncoder, extractToEmb1 } from './extract.js'
import { ModelUnavailable, MODELS } from './models.js'
import { smokeCheck } from './smoke.js'

function usage(): never {
  console.error(
    'usage: qksvm-extract extract --model <id> --in <images.idx> --out <file.emb1>\n' +
      '         [--labels <labels.idx>] [--indices <sel.json>] [--batch 16] [--limit N]\n' +
      '       qksvm-extract smoke --in <file.emb1>\n' +
      `models: ${Object.keys(MODELS).join(', ')}`,
  )
  process.exit(2)
}

async function runExtract(args: string[]) {
  const { values } = parseArgs({
    args,
    options: {
      model: { type: 'string' },
      in: { type: 'string' },
      out: { type: 'string' },
      labels: { type: 'string' },
      indices: { type: 'string' },
      batch: { type: 'string', default: '16' },
      limit: { type: 'string' },
    },
  })
  if (!values.model || !values.in || !values.out) usage()

  let indices: number[] | undefined
  if (values.indices) {
    const doc = JSON.parse(readFileSync(values.indices, 'utf-8'))
    indices = Array.isArray(doc) ? doc : doc.indices
    if (!Array.isArray(indices)) {
      throw new Error(`${values.indices} holds no index array`)
    }
  }
  if (values.limit) {
    const n = Number(values.limit)
    indices = (indices ?? Array.from({ length: n }, (_, i) => i)).slice(0, n)
  }

  const encoder = await ClipEncoder.load(values.model)
  const t0 = Date.now()
  const result = await extractToEmb1(encoder, {
    imagesPath: values.in,
    outPath: values.out,
    labelsPath: values.labels,
    indices,
    batchSize: Number(values.batch),
    onProgress: (done, total) => {
      if (done % 160 === 0 || done === total) {
        process.stderr.write(`\r${done}/${total} images`)
      }
    },
  })
  process.stderr.write('\n')
  console.log(
    `wrote ${values.out}: ${result.rows} x ${result.cols} ` +
      `(${((Date.now() - t0) / 1000).toFixed(1)}s), sidecar ${result.sidecarPath}`,
  )
}

function runSmoke(args: string[]) {
  const { values } = parseArgs({
    args,
    options: { in: { type: 'string' } },
  })
  if (!values.in) usage()
  const report = smokeCheck(values.in)
  if (report.ok) {
    console.log(`pass: ${report.rows} x ${report.cols}`)
    process.exit(0)
  }
  console.error(`fail: ${report.reasons.join('; ')}`)
  process.exit(1)
}

async function main() {
  const [cmd, ...rest] = process.argv.slice(2)
  try {
    if (cmd === 'extract') await runExtract(rest)
    else if (cmd === 'smoke') runSmoke(rest)
    else usage()
  } catch (err) {
    if (err instanceof ModelUnavailable) {
      console.error(`model unavailable: ${err.message}`)
      process.exit(3)
    }
    throw err
  }
}

main()
