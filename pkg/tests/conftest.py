from dtcsim.packets import DataSegment


class ScriptedDrops:
    """Force specific data-frame losses: {(seq, src_node): times_to_drop}.

    Anything unmatched falls through to the scenario's random loss draw.
    """

    def __init__(self, rules):
        self.remaining = dict(rules)

    def __call__(self, frame):
        if type(frame.payload) is DataSegment:
            key = (frame.payload.seq, frame.src)
            if self.remaining.get(key, 0) > 0:
                self.remaining[key] -= 1
                return True
        return None
