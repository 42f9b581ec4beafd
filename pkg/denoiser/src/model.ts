/**
 * Character-level encoder-decoder with global (dot-product) attention.
 *
 * Stacked LSTM encoder reads the noisy token one-hot per character; a
 * stacked LSTM decoder predicts the clean token one character at a time,
 * attending over all encoder states. Inputs are one-hot rather than an
 * embedding lookup so training stays inside the wasm backend's kernel set.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import * as tf from '@tensorflow/tfjs';

import { Vocab } from './vocab.js';

export interface TrainConfig {
  layers: number;
  hidden: number;
  learningRate: number;
  /** Multiplied into the learning rate each epoch once decay starts. */
  lrDecay: number;
  /** First epoch (1-based) after which the decay applies. */
  lrDecayStart: number;
  batchSize: number;
  maxEpochs: number;
  /** Stop after this many epochs without validation-loss improvement. */
  patience: number;
  beamSize: number;
  seed: number;
}

export const DEFAULT_CONFIG: TrainConfig = {
  layers: 2,
  hidden: 256,
  learningRate: 0.002,
  lrDecay: 0.75,
  lrDecayStart: 25,
  batchSize: 256,
  maxEpochs: 60,
  patience: 4,
  beamSize: 5,
  seed: 1,
};

export function resolveConfig(overrides: Partial<TrainConfig>): TrainConfig {
  const config = { ...DEFAULT_CONFIG, ...overrides };
  if (config.lrDecay <= 0 || config.lrDecay > 1) {
    throw new Error(`lrDecay must be in (0, 1], got ${config.lrDecay}`);
  }
  for (const key of ['layers', 'hidden', 'batchSize', 'maxEpochs', 'beamSize'] as const) {
    if (config[key] < 1) throw new Error(`${key} must be positive`);
  }
  return config;
}

function lstmLayer(name: string, units: number, seed: number): tf.layers.Layer {
  return tf.layers.lstm({
    name,
    units,
    returnSequences: true,
    kernelInitializer: tf.initializers.glorotUniform({ seed }),
    recurrentInitializer: tf.initializers.glorotUniform({ seed: seed + 1 }),
  });
}

/** Build the teacher-forced training graph. */
export function buildModel(vocabSize: number, config: TrainConfig): tf.LayersModel {
  const encIn = tf.input({ shape: [null, vocabSize], name: 'encoder_input' });
  const decIn = tf.input({ shape: [null, vocabSize], name: 'decoder_input' });

  let encSeq: tf.SymbolicTensor = encIn;
  for (let i = 0; i < config.layers; i++) {
    encSeq = lstmLayer(`encoder_lstm_${i}`, config.hidden, config.seed + i * 7) //
      .apply(encSeq) as tf.SymbolicTensor;
  }
  let decSeq: tf.SymbolicTensor = decIn;
  for (let i = 0; i < config.layers; i++) {
    decSeq = lstmLayer(`decoder_lstm_${i}`, config.hidden, config.seed + 100 + i * 7) //
      .apply(decSeq) as tf.SymbolicTensor;
  }

  // Global attention: scores decoder states against all encoder states.
  const scores = tf.layers
    .dot({ axes: [2, 2], name: 'attention_scores' })
    .apply([decSeq, encSeq]) as tf.SymbolicTensor;
  const weights = tf.layers
    .activation({ activation: 'softmax', name: 'attention_weights' })
    .apply(scores) as tf.SymbolicTensor;
  const context = tf.layers
    .dot({ axes: [2, 1], name: 'attention_context' })
    .apply([weights, encSeq]) as tf.SymbolicTensor;
  const combined = tf.layers
    .concatenate({ name: 'attention_concat' })
    .apply([context, decSeq]) as tf.SymbolicTensor;
  const attnVector = tf.layers
    .timeDistributed({
      name: 'attention_vector',
      layer: tf.layers.dense({
        units: config.hidden,
        activation: 'tanh',
        kernelInitializer: tf.initializers.glorotUniform({ seed: config.seed + 300 }),
      }),
    })
    .apply(combined) as tf.SymbolicTensor;
  const probs = tf.layers
    .timeDistributed({
      name: 'output_projection',
      layer: tf.layers.dense({
        units: vocabSize,
        activation: 'softmax',
        kernelInitializer: tf.initializers.glorotUniform({ seed: config.seed + 301 }),
      }),
    })
    .apply(attnVector) as tf.SymbolicTensor;

  return tf.model({ inputs: [encIn, decIn], outputs: probs as tf.SymbolicTensor });
}

/**
 * Re-wire the trained layers into (encoder, decoder-step) submodels for
 * decoding: the encoder runs once per token and the decoder re-runs over
 * the growing prefix, avoiding explicit LSTM state plumbing.
 */
export function inferenceModels(model: tf.LayersModel, vocabSize: number, layers: number) {
  const encIn = tf.input({ shape: [null, vocabSize] });
  let encSeq: tf.SymbolicTensor = encIn;
  for (let i = 0; i < layers; i++) {
    encSeq = model.getLayer(`encoder_lstm_${i}`).apply(encSeq) as tf.SymbolicTensor;
  }
  const encoder = tf.model({ inputs: encIn, outputs: encSeq });

  const hidden = (encoder.outputs[0].shape as number[])[2] as number;
  const decIn = tf.input({ shape: [null, vocabSize] });
  const encSeqIn = tf.input({ shape: [null, hidden] });
  let decSeq: tf.SymbolicTensor = decIn;
  for (let i = 0; i < layers; i++) {
    decSeq = model.getLayer(`decoder_lstm_${i}`).apply(decSeq) as tf.SymbolicTensor;
  }
  const scores = model
    .getLayer('attention_scores')
    .apply([decSeq, encSeqIn]) as tf.SymbolicTensor;
  const weights = model.getLayer('attention_weights').apply(scores) as tf.SymbolicTensor;
  const context = model
    .getLayer('attention_context')
    .apply([weights, encSeqIn]) as tf.SymbolicTensor;
  const combined = model
    .getLayer('attention_concat')
    .apply([context, decSeq]) as tf.SymbolicTensor;
  const attnVector = model.getLayer('attention_vector').apply(combined) as tf.SymbolicTensor;
  const probs = model.getLayer('output_projection').apply(attnVector) as tf.SymbolicTensor;
  const decoder = tf.model({ inputs: [decIn, encSeqIn], outputs: probs });
  return { encoder, decoder };
}

export interface ModelArtifact {
  model: tf.LayersModel;
  vocab: Vocab;
  config: TrainConfig;
}

/** Self-contained on-disk artifact: topology + weights + vocab + config. */
export async function saveArtifact(
  dir: string,
  model: tf.LayersModel,
  vocab: Vocab,
  config: TrainConfig,
): Promise<void> {
  fs.mkdirSync(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const weightData = artifacts.weightData as ArrayBuffer | ArrayBuffer[];
      const buffers = Array.isArray(weightData)
        ? weightData.map((b) => Buffer.from(b))
        : [Buffer.from(weightData)];
      fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.concat(buffers));
      fs.writeFileSync(
        path.join(dir, 'model.json'),
        JSON.stringify({
          modelTopology: artifacts.modelTopology,
          weightSpecs: artifacts.weightSpecs,
        }),
      );
      return {
        modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' as const },
      };
    }),
  );
  fs.writeFileSync(
    path.join(dir, 'meta.json'),
    JSON.stringify({ vocab: vocab.toJSON(), config }, null, 2),
  );
}

export async function loadArtifact(dir: string): Promise<ModelArtifact> {
  const topology = JSON.parse(fs.readFileSync(path.join(dir, 'model.json'), 'utf8'));
  const weights = fs.readFileSync(path.join(dir, 'weights.bin'));
  const model = await tf.loadLayersModel(
    tf.io.fromMemory({
      modelTopology: topology.modelTopology,
      weightSpecs: topology.weightSpecs,
      weightData: weights.buffer.slice(
        weights.byteOffset,
        weights.byteOffset + weights.byteLength,
      ),
    }),
  );
  const meta = JSON.parse(fs.readFileSync(path.join(dir, 'meta.json'), 'utf8'));
  return {
    model,
    vocab: Vocab.fromJSON(meta.vocab),
    config: resolveConfig(meta.config),
  };
}
