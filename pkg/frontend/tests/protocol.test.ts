import { describe, expect, it } from 'vitest';

import { parseCommandReply, parseTelemetry } from '../src/protocol.js';
import { initialViewModel, reduceTelemetry } from '../src/viewModel.js';
import { recordedEscalationLog } from './fixtures.js';

describe('telemetry parsing', () => {
  it('accepts every message the service fixture emits', () => {
    for (const message of recordedEscalationLog()) {
      expect(parseTelemetry(JSON.stringify(message))).not.toBeNull();
    }
  });

  it.each([
    ['not json', 'garbage{'],
    ['not an object', '[1,2,3]'],
    ['unknown kind', '{"kind":"NOISE","seq":1,"payload":{}}'],
    ['missing seq', '{"kind":"SAMPLE","payload":{}}'],
    ['missing payload', '{"kind":"SAMPLE","seq":1}'],
    ['sample without individuals', '{"kind":"SAMPLE","seq":1,"payload":{"frame_index":0,"level":"green"}}'],
    ['alert without kind', '{"kind":"ALERT","seq":1,"payload":{"audio":true}}'],
  ])('rejects malformed input: %s', (_label, raw) => {
    expect(parseTelemetry(raw)).toBeNull();
  });

  it('malformed messages leave the view unchanged', () => {
    const log = recordedEscalationLog();
    let view = initialViewModel();
    for (const message of log.slice(0, 4)) {
      view = reduceTelemetry(view, message).view;
    }
    const before = JSON.parse(JSON.stringify(view));
    const malformed = parseTelemetry('{"kind":"SAMPLE","seq":9}');
    expect(malformed).toBeNull(); // caller skips reduce entirely
    expect(JSON.parse(JSON.stringify(view))).toEqual(before);
  });
});

describe('command replies', () => {
  it('parses acks and rejections', () => {
    expect(parseCommandReply('{"kind":"ACK","command":"PAUSE"}')).toMatchObject({
      kind: 'ACK',
    });
    expect(
      parseCommandReply('{"kind":"REJECTED","command":"SET_THRESHOLD","reason":"range"}'),
    ).toMatchObject({ kind: 'REJECTED' });
  });

  it('rejects noise', () => {
    expect(parseCommandReply('nope')).toBeNull();
    expect(parseCommandReply('{"kind":"WAT"}')).toBeNull();
  });
});
