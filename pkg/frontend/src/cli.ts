#!/usr/bin/env node
import * as path from 'path'

import { decodeFeatures, extractFeatures, strideFor } from './pyramid'
import { initWeights, loadWeights, CHANNELS } from './weights'
import { readPng, writePng } from './png'
import { readTensor, writeTensor } from './tensor'

const USAGE = `usage:
  gotf-bridge init-weights --weights-dir DIR [--seed N]
  gotf-bridge extract --level R --image IN.png --out OUT.gotf [--weights-dir DIR]
  gotf-bridge decode  --level R --tensor IN.gotf --out OUT.png [--weights-dir DIR]

Flags may appear before or after the subcommand (the gaussot toolkit appends
its protocol arguments after any leading flags in the bridge command).`

interface Args {
  command?: string
  flags: Map<string, string>
}

const FLAGS_WITH_VALUE = new Set([
  '--weights-dir',
  '--seed',
  '--level',
  '--image',
  '--tensor',
  '--out',
])

function parseArgs(argv: string[]): Args {
  const args: Args = { flags: new Map() }
  for (let i = 0; i < argv.length; i++) {
    const token = argv[i]
    if (FLAGS_WITH_VALUE.has(token)) {
      const value = argv[i + 1]
      if (value === undefined) throw new Error(`${token} needs a value`)
      args.flags.set(token, value)
      i++
    } else if (token.startsWith('--')) {
      throw new Error(`unknown flag ${token}`)
    } else if (args.command === undefined) {
      args.command = token
    } else {
      throw new Error(`unexpected argument ${token}`)
    }
  }
  return args
}

function required(args: Args, flag: string): string {
  const value = args.flags.get(flag)
  if (value === undefined) throw new Error(`missing ${flag}`)
  return value
}

function parseLevel(args: Args): number {
  const level = Number(required(args, '--level'))
  if (!Number.isInteger(level)) throw new Error('--level must be an integer')
  return level
}

function weightsDir(args: Args): string {
  return args.flags.get('--weights-dir') ?? path.join(process.cwd(), 'weights')
}

function cmdInitWeights(args: Args): void {
  const dir = weightsDir(args)
  const seed = Number(args.flags.get('--seed') ?? '20240817')
  if (!Number.isFinite(seed)) throw new Error('--seed must be a number')
  const weights = initWeights(dir, seed)
  console.log(`weights_dir=${dir}`)
  console.log(`levels=${weights.levels}`)
  console.log(`channels=${weights.channels}`)
  console.log(`seed=${weights.seed}`)
}

function cmdExtract(args: Args): void {
  const level = parseLevel(args)
  const weights = loadWeights(weightsDir(args))
  const imagePath = required(args, '--image')
  const outPath = required(args, '--out')
  const tensor = extractFeatures(readPng(imagePath), level, weights)
  writeTensor(outPath, tensor.dims, tensor.data)
  const [c, h, w] = tensor.dims
  const outputPath = outPath.replace(/\.gotf$/, '') + '_out.gotf'
  // one ready-to-use manifest line for the gaussot toolkit
  console.log(`level=${level} input=${outPath} output=${outputPath} shape=${c},${h},${w}`)
}

function cmdDecode(args: Args): void {
  const level = parseLevel(args)
  const weights = loadWeights(weightsDir(args))
  const tensorPath = required(args, '--tensor')
  const outPath = required(args, '--out')
  const file = readTensor(tensorPath)
  if (file.dims.length !== 3 || file.dims[0] !== CHANNELS) {
    throw new Error(
      `expected a (${CHANNELS}, H, W) tensor for level ${level}, got dims ${file.dims.join('x')}`,
    )
  }
  const dims: [number, number, number] = [file.dims[0], file.dims[1], file.dims[2]]
  const image = decodeFeatures({ dims, data: file.data }, level, weights)
  writePng(outPath, image)
  console.log(`output=${outPath}`)
  console.log(`width=${image.width}`)
  console.log(`height=${image.height}`)
  console.log(`stride=${strideFor(level)}`)
}

export function run(argv: string[]): number {
  let args: Args
  try {
    args = parseArgs(argv)
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    console.error(USAGE)
    return 1
  }
  try {
    switch (args.command) {
      case 'init-weights':
        cmdInitWeights(args)
        return 0
      case 'extract':
        cmdExtract(args)
        return 0
      case 'decode':
        cmdDecode(args)
        return 0
      default:
        console.error(`error: unknown command ${args.command ?? '(none)'}`)
        console.error(USAGE)
        return 1
    }
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 2
  }
}

if (require.main === module) {
  process.exit(run(process.argv.slice(2)))
}
