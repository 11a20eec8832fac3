def place_object(obj, location):
    """Move an object to a world location in meters."""
    obj.location = tuple(float(v) for v in location)
