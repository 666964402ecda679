#!/usr/bin/env node
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { ActivationExtractor } from './export'
import { DEFAULT_LAYER_SPEC, LAYER_NAMES } from './model'

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .command('export', 'export layer activations as RFM1 stacks', (cmd) =>
      cmd
        .option('image', { type: 'string', describe: 'single input PNG' })
        .option('dir', { type: 'string', describe: 'directory of PNGs' })
        .option('out', { type: 'string', demandOption: true, describe: 'output .rfm file (with --image) or directory (with --dir)' })
        .option('layer', { type: 'string', default: DEFAULT_LAYER_SPEC.layer, choices: [...LAYER_NAMES] as string[] })
        .option('resize', { type: 'number', default: DEFAULT_LAYER_SPEC.resizeShortSide, describe: 'shorter-side resize target in pixels' })
        .conflicts('image', 'dir'),
    )
    .demandCommand(1)
    .strict()
    .parse()

  const extractor = new ActivationExtractor({
    layer: String(argv.layer),
    resizeShortSide: Number(argv.resize),
  })
  try {
    if (argv.image) {
      const info = extractor.exportImage(String(argv.image), String(argv.out))
      process.stdout.write(
        `wrote ${info.outPath}: ${info.channels}x${info.height}x${info.width} stride=${info.stride}\n`,
      )
    } else if (argv.dir) {
      const result = extractor.exportBatch(String(argv.dir), String(argv.out))
      process.stdout.write(
        `wrote ${result.exported.length} stacks (${result.skipped.length} skipped) and ${result.manifestPath}\n`,
      )
    } else {
      process.stderr.write('error: one of --image or --dir is required\n')
      return 1
    }
  } finally {
    extractor.dispose()
  }
  return 0
}

main()
  .then((code) => {
    process.exitCode = code
  })
  .catch((err) => {
    process.stderr.write(`error: ${(err as Error).message}\n`)
    process.exitCode = 1
  })
